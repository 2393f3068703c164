"""Step-size constants and constructed stationary points.

The constants bound the unscaled quartic ``F(Z) = tr(-2 Z^T W Z + (Z^T D Z)^2)``.
The solver iterates on ``Y = n Z``, for which a step ``alpha`` on the
n-scaled gradient equals a step ``alpha / n`` on ``F``; so the solver uses
``n * alpha_max`` and the ball radius ``n * R``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError


@dataclass(frozen=True)
class StepConstants:
    M1: float
    M2: float
    M_of_R: float
    L: float
    R: float
    alpha_max: float
    n: int

    @property
    def alpha_solver(self):
        """Step for the n-scaled iteration equivalent to ``alpha_max`` on ``F``."""
        return self.n * self.alpha_max

    @property
    def radius_solver(self):
        """Ball radius in the units of the solver iterate ``Y``."""
        return self.n * self.R


def offdiag_weighted_sq(p, deflated=None):
    """``s_i = |W_{i,i^c} D_{i^c}^{-1/2}|_2^2`` and the diagonal of the (deflated) W."""
    W = p.W.matrix
    d = p.d
    diag = p.W.diagonal.copy()
    s = np.asarray(W.multiply(W) @ (1.0 / d)).ravel() - diag**2 / d
    eta = p.use_eta(deflated)
    if eta is not None:
        # sum_j (W_ij - eta_i eta_j)^2 / d_j expanded with eta_j^2 / d_j = d_j / sum(d)
        total = d.sum()
        row_full = np.asarray(W.multiply(W) @ (1.0 / d)).ravel()
        s = row_full - 2.0 * eta * d / math.sqrt(total) + eta**2
        diag = diag - eta**2
        s = s - diag**2 / d
    return np.maximum(s, 0.0), diag


def _max_abs_weight(p, deflated=None):
    eta = p.use_eta(deflated)
    vals = p.W.values
    if eta is None:
        return float(np.abs(vals).max()) if vals.size else 0.0
    m = p.W.matrix.tocoo()
    stored = np.abs(m.data - eta[m.row] * eta[m.col]).max() if m.nnz else 0.0
    return float(max(stored, eta.max() ** 2))


def _batch_max(batch_sizes):
    if hasattr(batch_sizes, "max_size"):
        return int(batch_sizes.max_size)
    if np.isscalar(batch_sizes):
        return int(batch_sizes)
    return int(max(len(b) if hasattr(b, "__len__") else int(b) for b in batch_sizes))


def step_constants(p, K, batch_sizes, R_opt=None, deflated=None):
    """Lemma-level constants ``M1, M2, M(R), L`` and the admissible step ``alpha_max``.

    ``batch_sizes`` is a BatchPlan, an int (largest batch), or a sequence of
    batches / sizes.
    """
    if K < 1:
        raise InputError("K must be >= 1")
    n = p.n
    d = p.d
    s, wii = offdiag_weighted_sq(p, deflated)
    M1 = float(np.max((wii + np.sqrt(wii**2 + d * s + d / 2.0)) / (2.0 * d)))
    M2 = float(np.max(wii**2 / (4.0 * d) + s / 4.0))
    R = 2.0 * math.sqrt(M1)
    if R_opt is not None:
        R = max(float(R_opt), R)
    R2 = R * R
    dmax = float(d.max())
    M = 3.0 * (
        float(np.max(wii**2)) * R2
        + dmax**2 * n**2 * K**2 * R2**3
        + float(np.max(d * s)) * n * R2
    )
    L = 4.0 * _max_abs_weight(p, deflated) + 4.0 * (n + K) * R2 * dmax
    bmax = _batch_max(batch_sizes)
    alpha = min(
        (-2.0 * M2 + math.sqrt(4.0 * M2**2 + 3.0 * M * R2)) / (8.0 * M),
        1.0 / (16.0 * M),
        1.0 / (K * L * bmax),
    )
    return StepConstants(M1, M2, M, L, R, alpha, n)


def ball_radius(p, Y):
    """``max_i |D_i^{1/2} Y_i|_2``."""
    return float(np.sqrt(np.max(p.d * np.sum(Y * Y, axis=1))))


def stationary_point(eig, indices, Q=None, n=None):
    """``Y = n V_S Lambda_S^{1/2} Q`` for the eigenpairs ``indices`` of a DenseEig.

    ``V`` is D-orthonormal, so ``Y^T D Y = n^2 Q^T Lambda_S Q``. With
    ``indices = range(K)`` this is a global minimizer of f2.
    """
    idx = np.asarray(indices, dtype=np.int64)
    lam = eig.eigenvalues[idx]
    if np.any(lam < 0):
        raise InputError("stationary points need nonnegative eigenvalues")
    V = eig.eigenvectors[:, idx]
    if n is None:
        n = V.shape[0]
    Y = n * V * np.sqrt(lam)[None, :]
    if Q is not None:
        Y = Y @ np.asarray(Q, dtype=float)
    return Y


def saddle_direction(eig, i, K, Q=None, n=None):
    """Direction ``n [V_i, 0, ..., 0] Q`` of negative curvature.

    Pairs with ``stationary_point(eig, [K, <leading K minus i>], Q)``, whose
    first column carries eigenvector ``K`` (0-based, i.e. the (K+1)-th).
    """
    V = eig.eigenvectors
    if n is None:
        n = V.shape[0]
    S = np.zeros((V.shape[0], K))
    S[:, 0] = n * V[:, i]
    if Q is not None:
        S = S @ np.asarray(Q, dtype=float)
    return S


def saddle_indices(i, K):
    """Eigen-indices of the saddle that swaps eigenvector ``i < K`` for eigenvector ``K``."""
    if not 0 <= i < K:
        raise InputError("i must satisfy 0 <= i < K")
    return [K] + [j for j in range(K) if j != i]


def random_orthogonal(K, rng):
    A = rng.standard_normal((K, K))
    Q, R = np.linalg.qr(A)
    return Q * np.sign(np.diag(R))[None, :]
