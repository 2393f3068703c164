"""Dense reference computations used as ground truth.

Everything here is small and exact: full generalized eigendecompositions of
``(W, D)`` with diagonal ``D``, Householder QR of tall blocks, Cholesky of
small SPD matrices, finite differences and alignment-based error metrics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import InputError, NotSPDError, RankError

ORACLE_CAP = 2048


@dataclass(frozen=True, eq=False)
class DenseEig:
    """Eigenpairs of ``W v = lambda D v``, eigenvalues descending.

    Eigenvectors are D-orthonormal (``V^T D V = I``) with the largest-magnitude
    entry of every column positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def leading(self, k):
        return self.eigenvalues[:k], self.eigenvectors[:, :k]


def _as_dense(W):
    if hasattr(W, "toarray"):
        return W.toarray()
    return np.asarray(W, dtype=float)


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def jacobi_eigh(A, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps until the off-diagonal Frobenius norm drops below ``tol * |A|_F``.
    Returns unsorted ``(eigenvalues, eigenvectors)``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0:
        return np.zeros(n), V
    for _ in range(max_sweeps):
        off = math.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(apq) < 1e-18 * abs(diff):
                    # |theta| huge: t = 1 / (2 theta) to first order, avoids overflow
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return np.diag(A).copy(), V


def dense_gevp(W, d, method="lapack", cap=ORACLE_CAP):
    """All eigenpairs of the pencil ``(W, diag(d))``.

    The pencil is symmetrized as ``D^{-1/2} W D^{-1/2}``, decomposed, and the
    eigenvectors are mapped back with ``D^{-1/2}``. ``method`` is ``"lapack"``
    (``scipy.linalg.eigh``) or ``"jacobi"`` (:func:`jacobi_eigh`).
    """
    A = _as_dense(W)
    d = np.asarray(d, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or d.shape != (n,):
        raise InputError("W must be square and d must match its size")
    if n > cap:
        raise InputError(f"dense oracle capped at n <= {cap} (got {n})")
    if np.any(d <= 0):
        raise InputError("degrees must be positive")
    scale = max(np.abs(A).max(), 1.0)
    if np.abs(A - A.T).max() > 1e-12 * scale:
        raise InputError("W is not symmetric")
    s = 1.0 / np.sqrt(d)
    S = (A + A.T) * 0.5 * s[:, None] * s[None, :]
    if method == "lapack":
        lam, V = sla.eigh(S)
    elif method == "jacobi":
        lam, V = jacobi_eigh(S)
    else:
        raise InputError(f"unknown method {method!r}")
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    V = s[:, None] * V[:, order]
    return DenseEig(lam, _fix_signs(V))


def qr_tall(A):
    """Householder QR of a tall ``b x K`` block with ``diag(R) >= 0``."""
    A = np.array(A, dtype=float)
    if A.ndim != 2:
        raise InputError("qr_tall expects a matrix")
    b, K = A.shape
    if b < K:
        raise InputError(f"qr_tall needs b >= K (got {b} x {K})")
    norm = np.linalg.norm(A)
    R = A.copy()
    vs = []
    for k in range(K):
        x = R[k:, k]
        alpha = np.linalg.norm(x)
        v = x.copy()
        v[0] += math.copysign(alpha, x[0]) if x[0] != 0 else alpha
        vn = np.linalg.norm(v)
        if vn > 0:
            v /= vn
            R[k:, k:] -= 2.0 * np.outer(v, v @ R[k:, k:])
        vs.append(v)
    Q = np.eye(b, K)
    for k in reversed(range(K)):
        v = vs[k]
        Q[k:, :] -= 2.0 * np.outer(v, v @ Q[k:, :])
    R = np.triu(R[:K])
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    R *= signs[:, None]
    Q *= signs[None, :]
    if np.any(np.abs(np.diag(R)) < 1e-12 * norm) or norm == 0:
        raise RankError("rank-deficient block in QR factorization")
    return Q, R


def cholesky_spd(A, rtol=1e-12):
    """Lower-triangular ``L`` with ``L L^T = A``.

    A pivot at or below ``rtol * max(diag(A))`` counts as nonpositive: duplicated
    columns leave rounding-level positive pivots that must still be rejected.
    """
    A = np.asarray(A, dtype=float)
    K = A.shape[0]
    if A.shape != (K, K):
        raise InputError("cholesky_spd expects a square matrix")
    L = np.zeros_like(A)
    floor = rtol * max(float(np.max(np.diag(A), initial=0.0)), 0.0)
    for j in range(K):
        pivot = A[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > floor:
            raise NotSPDError(f"nonpositive pivot {pivot:.3g} at column {j}")
        L[j, j] = math.sqrt(pivot)
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def relative_error(psi_ref, psi_hat):
    """``|psi - beta psi_hat| / |psi|`` with the least-squares scale ``beta``."""
    psi = np.asarray(psi_ref, dtype=float).ravel()
    est = np.asarray(psi_hat, dtype=float).ravel()
    ref_norm = np.linalg.norm(psi)
    if ref_norm == 0:
        raise InputError("reference vector is zero")
    denom = est @ est
    beta = (psi @ est) / denom if denom > 0 else 0.0
    return float(np.linalg.norm(psi - beta * est) / ref_norm)


def subspace_error(U_ref, U_hat, d):
    """Sine of the largest principal angle between D^{1/2}-weighted spans."""
    w = np.sqrt(np.asarray(d, dtype=float))[:, None]
    Q1, _ = qr_tall(w * np.asarray(U_ref, dtype=float))
    Q2, _ = qr_tall(w * np.asarray(U_hat, dtype=float))
    resid = Q2 - Q1 @ (Q1.T @ Q2)
    return float(min(np.linalg.norm(resid, 2), 1.0))


def finite_diff_grad(f, Y, h=1e-5):
    """Entrywise central differences of a scalar function of a matrix."""
    Y = np.array(Y, dtype=float)
    G = np.zeros_like(Y)
    for idx in np.ndindex(Y.shape):
        orig = Y[idx]
        Y[idx] = orig + h
        fp = f(Y)
        Y[idx] = orig - h
        fm = f(Y)
        Y[idx] = orig
        G[idx] = (fp - fm) / (2.0 * h)
    return G
