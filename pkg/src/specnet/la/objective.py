"""Objectives and batch gradients.

``f2`` is the unconstrained quartic

    f2(Y) = tr(-2 Y^T (W - eta eta^T) Y + Y^T D Y Y^T D Y / n^2) / n^2

and every "gradient" below is ``n`` times its true gradient, the scaling
used by the batch updates. ``f1`` works on the variable ``D^{-1/2} Y`` with
the constraint ``Y^T D Y = n^2 I``; its "gradient" is ``2 (I - D^{-1} W) Y``.
"""
from __future__ import annotations

import numpy as np

from ..errors import InputError, StateError

SCHEMES = ("local", "full", "neighbor")


class WorkCounter:
    """Tally of multiply-adds performed by the batch steps."""

    def __init__(self):
        self.madds = 0
        self.steps = 0

    def add(self, count):
        self.madds += int(count)

    def reset(self):
        self.madds = 0
        self.steps = 0


def _count(counter, value):
    if counter is not None:
        counter.add(value)


def f2_value(p, Y, deflated=None):
    n = p.n
    eta = p.use_eta(deflated)
    WY = p.W.matrix @ Y
    quad = np.sum(Y * WY)
    if eta is not None:
        u = eta @ Y
        quad -= u @ u
    C = Y.T @ (p.d[:, None] * Y)
    return float((-2.0 * quad + np.sum(C * C) / n**2) / n**2)


def f2_grad_full_matrix(p, Y, deflated=None):
    """``-4 (W - eta eta^T) Y / n + 4 D Y (Y^T D Y) / n^3``."""
    n = p.n
    eta = p.use_eta(deflated)
    G = p.W.matrix @ Y
    if eta is not None:
        G = G - np.outer(eta, eta @ Y)
    C = Y.T @ (p.d[:, None] * Y)
    return -4.0 / n * G + 4.0 / n**3 * (p.d[:, None] * Y) @ C


def local_pencil(p, batch, deflated=None):
    """Batch-local ``W_BB``, its row sums and (optionally) its deflation vector."""
    cols, block = p.W.row_block(batch)
    Wbb = np.zeros((batch.size, batch.size))
    pos = np.searchsorted(batch, cols)
    inside = (pos < batch.size) & (batch[np.minimum(pos, batch.size - 1)] == cols)
    Wbb[:, pos[inside]] = block[:, inside]
    dloc = Wbb.sum(axis=1)
    eta_loc = None
    if p.use_eta(deflated) is not None:
        total = dloc.sum()
        eta_loc = dloc / np.sqrt(total) if total > 0 else np.zeros_like(dloc)
    return Wbb, dloc, eta_loc


def f2_grad_batch(p, emb, batch, scheme, deflated=None, counter=None):
    """Gradient rows for ``batch`` under the local, full or neighbor scheme."""
    batch = np.asarray(batch, dtype=np.int64)
    Y = emb.Y
    n, K = Y.shape
    eta = p.use_eta(deflated)
    Yb = Y[batch]
    if scheme == "local":
        b = batch.size
        Wbb, dloc, eta_loc = local_pencil(p, batch, deflated)
        lin = Wbb @ Yb
        if eta_loc is not None:
            lin -= np.outer(eta_loc, eta_loc @ Yb)
        DYb = dloc[:, None] * Yb
        _count(counter, b * b * K + 2 * b * K * K)
        return -4.0 / b * lin + 4.0 / b**3 * DYb @ (Yb.T @ DYb)
    cols, block = p.W.row_block(batch)
    lin = block @ Y[cols]
    _count(counter, np.count_nonzero(block) * K + batch.size * K * K)
    if scheme == "full":
        C = Y.T @ (p.d[:, None] * Y)
        _count(counter, n * K * K)
        if eta is not None:
            lin -= np.outer(eta[batch], eta @ Y)
            _count(counter, n * K + batch.size * K)
    elif scheme == "neighbor":
        if emb.C is None or emb.u is None:
            raise StateError("neighbor scheme needs the Y^T D Y and eta^T Y caches")
        C = emb.C
        if eta is not None:
            lin -= np.outer(eta[batch], emb.u)
            _count(counter, batch.size * K)
    else:
        raise InputError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return -4.0 / n * lin + 4.0 / n**3 * (p.d[batch, None] * Yb) @ C


def hessian_quadratic_form(p, Y, S, deflated=None):
    """Second directional derivative ``d^2/dt^2 f2(Y + t S)`` at ``t = 0``."""
    n = p.n
    eta = p.use_eta(deflated)
    WS = p.W.matrix @ S
    quad = np.sum(S * WS)
    if eta is not None:
        v = eta @ S
        quad -= v @ v
    DS = p.d[:, None] * S
    C = Y.T @ (p.d[:, None] * Y)
    SDS = S.T @ DS
    A = DS.T @ Y
    quartic = np.sum(SDS * C.T) + np.sum(A * A.T) + np.sum(A * A)
    return float(-4.0 * quad / n**2 + 4.0 * quartic / n**4)


def f1_value(p, Y):
    """``tr(Y^T (D - W) Y) / n^2``; equals ``K - sum(lambda)`` at the constrained optimum."""
    n = p.n
    return float((np.sum(p.d[:, None] * Y * Y) - np.sum(Y * (p.W.matrix @ Y))) / n**2)


def f1_grad_batch(p, emb, batch, scheme, counter=None):
    batch = np.asarray(batch, dtype=np.int64)
    Y = emb.Y
    K = Y.shape[1]
    Yb = Y[batch]
    if scheme == "local":
        Wbb, dloc, _ = local_pencil(p, batch, deflated=False)
        if np.any(dloc <= 0):
            raise StateError("batch-local degree is zero; local f1 scheme undefined for this batch")
        _count(counter, batch.size**2 * K)
        return 2.0 * (Yb - (Wbb @ Yb) / dloc[:, None])
    if scheme not in ("full", "neighbor"):
        raise InputError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    cols, block = p.W.row_block(batch)
    _count(counter, np.count_nonzero(block) * K)
    return 2.0 * (Yb - (block @ Y[cols]) / p.d[batch, None])
