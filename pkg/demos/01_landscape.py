"""Why f2 can be minimized without orthogonalization.

Every stationary point of f2 is built from eigenvectors of the pencil (W, D).
The ones using the top K eigenvectors are global minima. Any other choice
has a direction of negative curvature, so plain descent escapes it. This
script checks both facts numerically on a small random graph.
"""
from __future__ import annotations

import numpy as np

from specnet.graph import SparseSym
from specnet.la import (
    Pencil,
    f2_grad_full_matrix,
    f2_value,
    hessian_quadratic_form,
    random_orthogonal,
    saddle_direction,
    saddle_indices,
    stationary_point,
    step_constants,
)

rng = np.random.default_rng(0)
n, K = 40, 3

# A connected random graph with unit self loops.
A = rng.uniform(0.1, 1.0, (n, n)) * (rng.random((n, n)) < 0.2)
A = 0.5 * (A + A.T)
A[np.arange(n - 1), np.arange(1, n)] = A[np.arange(1, n), np.arange(n - 1)] = 0.5
np.fill_diagonal(A, 1.0)
p = Pencil.from_affinity(SparseSym(A), deflate=True)
eig = p.oracle()
lam = eig.eigenvalues
print("leading eigenvalues of the deflated pencil:", np.round(lam[: K + 1], 4))

# Minimizers: Y = n V_K Lambda^{1/2} Q for any orthogonal Q.
print("\nminimizers (different rotations Q give the same value)")
for trial in range(3):
    Y = stationary_point(eig, range(K), random_orthogonal(K, rng))
    g = np.linalg.norm(f2_grad_full_matrix(p, Y))
    print(f"  Q #{trial}: f2 = {f2_value(p, Y):+.12f}   |grad| = {g:.1e}")
print(f"  -sum(lambda^2) = {-np.sum(lam[:K] ** 2):+.12f}")

# Saddles: swap eigenvector i for eigenvector K+1.
print("\nsaddles (one eigenvector replaced by the (K+1)-th)")
for i in range(K):
    Q = random_orthogonal(K, rng)
    Y = stationary_point(eig, saddle_indices(i, K), Q)
    S = saddle_direction(eig, i, K, Q)
    H = hessian_quadratic_form(p, Y, S)
    print(f"  i={i}: curvature {H:+.6f}, predicted {-4 * lam[i] + 4 * lam[K]:+.6f}")

c = step_constants(p, K, 4)
print(f"\nconstant step that provably converges for batches of 4: alpha = {c.alpha_solver:.3e}")
print(f"(iterates stay in the ball max_i |D_i^(1/2) Y_i| < {c.radius_solver:.3f})")
