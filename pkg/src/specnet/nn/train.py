"""Training eigenfunction networks with the local, full and neighbor schemes.

Every step forms a constant matrix ``G`` (the scheme's batch gradient with
respect to the network output) and takes an Adam step on ``tr(Y_B(theta)^T G)``.
SpecNet2 minimizes f2 with no factorization; SpecNet1 appends a K x K
orthogonalization layer ``Xi`` reset from a QR / Cholesky factorization.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from ..errors import DegenerateEmbeddingError, InputError, StateError
from ..la.objective import SCHEMES, local_pencil
from ..la.pencil import BatchPlan
from ..la.solver import rayleigh_ritz
from ..oracle import cholesky_spd, qr_tall, relative_error
from .adam import AdamState, adam_update
from .mlp import backward, forward_trace, mlp_forward

MODELS = ("specnet2", "specnet1")


@dataclass(eq=False)
class NeighborCaches:
    """Detached snapshot ``Y0`` of the outputs with ``C_star = Y0^T D Y0`` and ``u_star = eta^T Y0``."""

    Y0: np.ndarray
    C_star: np.ndarray
    u_star: np.ndarray

    @classmethod
    def initialize(cls, params, X, p):
        Y = mlp_forward(params, X)
        eta = p.eta if p.eta is not None else np.zeros(p.n)
        return cls(Y, Y.T @ (p.d[:, None] * Y), eta @ Y)

    def refresh(self, p, rows, Y_rows):
        """Replace the snapshot on ``rows`` and patch the two reductions."""
        old = self.Y0[rows]
        dr = p.d[rows, None]
        self.C_star = self.C_star - old.T @ (dr * old) + Y_rows.T @ (dr * Y_rows)
        if p.eta is not None:
            self.u_star = self.u_star + p.eta[rows] @ (Y_rows - old)
        self.Y0[rows] = Y_rows


@dataclass(eq=False)
class OrthLayer:
    Xi: np.ndarray


def _rows_with_batch(p, batch):
    """Neighborhood columns of the batch, their union with the batch, and batch positions in the union."""
    cols, block = p.W.row_block(batch)
    rows = np.union1d(cols, batch)
    return cols, block, rows, np.searchsorted(rows, batch)


def _select(acts, pos):
    return [a[pos] for a in acts]


def _local_f2_grad(p, batch, Yb):
    b = batch.size
    Wbb, dloc, eta_loc = local_pencil(p, batch)
    lin = Wbb @ Yb
    if eta_loc is not None:
        lin -= np.outer(eta_loc, eta_loc @ Yb)
    DYb = dloc[:, None] * Yb
    return -4.0 / b * lin + 4.0 / b**3 * DYb @ (Yb.T @ DYb)


def specnet2_train_step(params, X, p, caches, batch, scheme, lr, adam):
    """One Adam step of SpecNet2. Returns the constant gradient ``G`` used."""
    batch = np.asarray(batch, dtype=np.int64)
    n = p.n
    eta = p.eta
    if scheme == "local":
        Yb, acts = forward_trace(params, X[batch])
        G = _local_f2_grad(p, batch, Yb)
    elif scheme == "full":
        Y, acts_all = forward_trace(params, X)
        acts = _select(acts_all, batch)
        cols, block = p.W.row_block(batch)
        lin = block @ Y[cols]
        if eta is not None:
            lin -= np.outer(eta[batch], eta @ Y)
        C = Y.T @ (p.d[:, None] * Y)
        G = -4.0 / n * lin + 4.0 / n**3 * (p.d[batch, None] * Y[batch]) @ C
    elif scheme == "neighbor":
        if caches is None:
            raise StateError("neighbor scheme needs initialized caches")
        cols, block, rows, pos = _rows_with_batch(p, batch)
        Yr, acts_r = forward_trace(params, X[rows])
        caches.refresh(p, rows, Yr)
        acts = _select(acts_r, pos)
        lin = block @ caches.Y0[cols]
        if eta is not None:
            lin -= np.outer(eta[batch], caches.u_star)
        G = -4.0 / n * lin + 4.0 / n**3 * (p.d[batch, None] * Yr[pos]) @ caches.C_star
    else:
        raise InputError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    grads = backward(params, acts, G)
    adam_update(params.arrays, adam, grads, lr)
    return G


def _xi_from_qr(A, scale, Xi_prev):
    base = A if Xi_prev is None else A @ Xi_prev
    _, R = qr_tall(base)
    Rinv = solve_triangular(R, np.eye(R.shape[0]), lower=False)
    return scale * (Rinv if Xi_prev is None else Xi_prev @ Rinv)


def _xi_from_cholesky(C, scale, Xi_prev):
    M = C if Xi_prev is None else Xi_prev.T @ C @ Xi_prev
    L = cholesky_spd(0.5 * (M + M.T))
    LinvT = solve_triangular(L, np.eye(L.shape[0]), lower=True).T
    return scale * (LinvT if Xi_prev is None else Xi_prev @ LinvT)


def specnet1_train_step(
    params, orth, X, p, caches, batch, scheme, lr, adam, xi_adam=None, xi_grad=True, xi_persist=False
):
    """One step of SpecNet1: reset ``Xi`` from the factorization, Adam on theta, then (optionally) on ``Xi``.

    ``xi_persist`` composes the new factor with the previous ``Xi`` instead of
    overwriting it. Factorization failures raise DegenerateEmbeddingError.
    """
    batch = np.asarray(batch, dtype=np.int64)
    n = p.n
    prev = orth.Xi if xi_persist else None
    if scheme == "local":
        b = batch.size
        Yb, acts = forward_trace(params, X[batch])
        Wbb, dloc, _ = local_pencil(p, batch, deflated=False)
        if np.any(dloc <= 0):
            raise StateError("batch-local degree is zero")
        orth.Xi = _xi_from_qr(np.sqrt(dloc)[:, None] * Yb, b, prev)
        Yt = Yb @ orth.Xi
        G = 2.0 * (Yt - (Wbb @ Yt) / dloc[:, None])
    elif scheme == "full":
        Y, acts_all = forward_trace(params, X)
        acts = _select(acts_all, batch)
        Yb = Y[batch]
        orth.Xi = _xi_from_qr(np.sqrt(p.d)[:, None] * Y, n, prev)
        cols, block = p.W.row_block(batch)
        Yt_b = Yb @ orth.Xi
        G = 2.0 * (Yt_b - (block @ (Y[cols] @ orth.Xi)) / p.d[batch, None])
    elif scheme == "neighbor":
        if caches is None:
            raise StateError("neighbor scheme needs initialized caches")
        cols, block, rows, pos = _rows_with_batch(p, batch)
        Yr, acts_r = forward_trace(params, X[rows])
        caches.refresh(p, rows, Yr)
        acts = _select(acts_r, pos)
        Yb = Yr[pos]
        orth.Xi = _xi_from_cholesky(caches.C_star, n, prev)
        G = 2.0 * (Yb @ orth.Xi - (block @ (caches.Y0[cols] @ orth.Xi)) / p.d[batch, None])
    else:
        raise InputError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    grads = backward(params, acts, G @ orth.Xi.T)
    adam_update(params.arrays, adam, grads, lr)
    if xi_grad and xi_adam is not None:
        adam_update([orth.Xi], xi_adam, [Yb.T @ G], lr)
    return G


def evaluate_embedding(params, X, p, ref, K, xi=None, skip=0):
    """Relative errors of the Rayleigh-Ritz vectors ``skip .. skip+K-1`` against ``ref`` columns.

    The network output (times ``xi`` when given) spans the trial subspace on
    the pencil ``p``; Rayleigh-Ritz undoes any invertible mixing of columns.
    """
    Y = mlp_forward(params, X)
    if xi is not None:
        Y = Y @ xi
    if Y.shape[1] < skip + K:
        raise InputError(f"network output has {Y.shape[1]} columns, need {skip + K}")
    U, _ = rayleigh_ritz(p, Y)
    return [relative_error(ref.eigenvectors[:, skip + j], U[:, skip + j]) for j in range(K)]


@dataclass
class TrainResult:
    params: object
    orth: OrthLayer | None
    history: list = field(default_factory=list)
    failed: str | None = None


def train(
    params,
    X,
    p,
    model="specnet2",
    scheme="neighbor",
    batch_size=4,
    lr=1e-3,
    epochs=10,
    seed=0,
    callback=None,
    xi_grad=True,
    xi_persist=False,
):
    """Epoch loop over a reshuffled disjoint partition.

    ``callback(epoch, params, orth)`` returns a dict merged into the history
    row for that epoch (epoch 0 is the untrained network). A SpecNet1
    factorization failure stops the run and is recorded in ``result.failed``.
    """
    if model not in MODELS:
        raise InputError(f"unknown model {model!r}; expected one of {MODELS}")
    if scheme not in SCHEMES:
        raise InputError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    X = np.asarray(X, dtype=float)
    if X.shape[0] != p.n:
        raise InputError("one input row per graph node required")
    plan = BatchPlan.random(p.n, batch_size, seed=seed, order="reshuffle")
    adam = AdamState.like(params.arrays)
    K_out = params.sizes[-1]
    orth = OrthLayer(np.eye(K_out)) if model == "specnet1" else None
    xi_adam = AdamState.like([orth.Xi]) if orth is not None else None
    caches = NeighborCaches.initialize(params, X, p) if scheme == "neighbor" else None
    result = TrainResult(params, orth)
    t0 = time.perf_counter()

    def record(epoch):
        row = {"epoch": epoch, "wall_time_s": time.perf_counter() - t0}
        if callback is not None:
            row.update(callback(epoch, params, orth) or {})
        result.history.append(row)

    record(0)
    for epoch in range(1, epochs + 1):
        try:
            for batch in plan.epoch():
                if model == "specnet2":
                    specnet2_train_step(params, X, p, caches, batch, scheme, lr, adam)
                else:
                    specnet1_train_step(
                        params, orth, X, p, caches, batch, scheme, lr, adam,
                        xi_adam=xi_adam, xi_grad=xi_grad, xi_persist=xi_persist,
                    )
        except DegenerateEmbeddingError as exc:
            result.failed = f"{exc.category}: {exc} (epoch {epoch})"
            break
        record(epoch)
    return result
