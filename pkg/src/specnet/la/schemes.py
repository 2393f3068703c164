"""Single batch updates for f2 (orthogonalization-free) and f1 (QR / Cholesky normalized)."""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from ..errors import DivergenceError, InputError
from ..oracle import cholesky_spd, qr_tall
from .objective import f1_grad_batch, f2_grad_batch, local_pencil


def _check_finite(block, iteration):
    if not np.all(np.isfinite(block)):
        where = f" at iteration {iteration}" if iteration is not None else ""
        raise DivergenceError(f"non-finite iterate{where}", iteration=iteration)


def f2_step(emb, p, batch, alpha, scheme, deflated=None, counter=None, iteration=None):
    """``Y_B <- Y_B - alpha * grad_B`` in place; returns ``emb``.

    Caches: the neighbor scheme updates ``C`` and ``u`` with the batch rows
    only, the full scheme recomputes them, the local scheme leaves them stale.
    """
    if alpha < 0:
        raise InputError("alpha must be nonnegative")
    batch = np.asarray(batch, dtype=np.int64)
    # overflow surfaces as DivergenceError below, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        G = f2_grad_batch(p, emb, batch, scheme, deflated=deflated, counter=counter)
        old = emb.Y[batch]
        new = old - alpha * G
    _check_finite(new, iteration)
    emb.Y[batch] = new
    n, K = emb.Y.shape
    eta = p.use_eta(deflated)
    if scheme == "neighbor":
        db = p.d[batch, None]
        with np.errstate(over="ignore", invalid="ignore"):
            emb.C = emb.C - old.T @ (db * old) + new.T @ (db * new)
        if eta is not None:
            emb.u = emb.u + eta[batch] @ (new - old)
        if counter is not None:
            counter.add(2 * batch.size * K * K + 2 * batch.size * K)
    elif scheme == "full":
        emb.C = emb.Y.T @ (p.d[:, None] * emb.Y)
        emb.u = eta @ emb.Y if eta is not None else np.zeros(K)
        emb.fresh = True
        if counter is not None:
            counter.add(n * K * K + (n * K if eta is not None else 0))
    else:
        emb.fresh = False
    if counter is not None:
        counter.steps += 1
    return emb


def _right_inv_upper(Y, R):
    return solve_triangular(R, Y.T, trans="T", lower=False).T


def _right_inv_lower_t(Y, L):
    return solve_triangular(L, Y.T, lower=True).T


def normalize_full(emb, p):
    """``D^{1/2} Y = QR``, ``Y <- n Y R^{-1}`` so that ``Y^T D Y = n^2 I``."""
    n = p.n
    _, R = qr_tall(np.sqrt(p.d)[:, None] * emb.Y)
    emb.Y = n * _right_inv_upper(emb.Y, R)
    emb.C = emb.Y.T @ (p.d[:, None] * emb.Y)
    emb.u = np.zeros(emb.K) if p.eta is None else p.eta @ emb.Y
    emb.fresh = True
    return emb


def f1_batch_step(emb, p, batch, alpha, scheme, counter=None, iteration=None):
    """Gradient step on ``D^{-1/2} Y`` for the batch, then the scheme's normalization."""
    if alpha < 0:
        raise InputError("alpha must be nonnegative")
    batch = np.asarray(batch, dtype=np.int64)
    n, K = emb.Y.shape
    with np.errstate(over="ignore", invalid="ignore"):
        G = f1_grad_batch(p, emb, batch, scheme, counter=counter)
        old = emb.Y[batch]
        new = old - alpha * G
    _check_finite(new, iteration)
    if scheme == "local":
        _, dloc, _ = local_pencil(p, batch, deflated=False)
        _, R = qr_tall(np.sqrt(dloc)[:, None] * new)
        emb.Y[batch] = batch.size * _right_inv_upper(new, R)
        emb.fresh = False
    elif scheme == "full":
        emb.Y[batch] = new
        normalize_full(emb, p)
        if counter is not None:
            counter.add(2 * n * K * K)
    elif scheme == "neighbor":
        db = p.d[batch, None]
        C = emb.C - old.T @ (db * old) + new.T @ (db * new)
        emb.Y[batch] = new
        L = cholesky_spd(0.5 * (C + C.T))
        emb.Y = n * _right_inv_lower_t(emb.Y, L)
        Linv = solve_triangular(L, np.eye(K), lower=True)
        emb.C = n * n * Linv @ C @ Linv.T
        if counter is not None:
            counter.add(2 * batch.size * K * K + n * K * K)
    else:
        raise InputError(f"unknown scheme {scheme!r}")
    if counter is not None:
        counter.steps += 1
    return emb
