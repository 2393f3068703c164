"""Iteration driver, Rayleigh-Ritz recovery and embedding checkpoints."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from ..errors import DivergenceError, InputError, ParseError, RankError
from .objective import SCHEMES, f1_value, f2_grad_full_matrix, f2_value
from .pencil import BatchPlan, Embedding, Pencil
from .schemes import f1_batch_step, f2_step, normalize_full
from .theory import ball_radius, step_constants

DENSE_KERNEL_CAP = 4096


@dataclass
class EpochRecord:
    epoch: int
    objective: float
    grad_norm: float
    ball_radius: float
    wall_time: float
    madds: int = 0
    mean_neighborhood: float = 0.0
    extra: dict = field(default_factory=dict)


@dataclass
class SolveReport:
    """Record 0 is the initial state; then one record per reported epoch."""

    objective: str
    scheme: str
    alpha: float
    records: list = field(default_factory=list)
    converged: bool = False

    @property
    def epochs_completed(self):
        return self.records[-1].epoch if self.records else 0

    @property
    def max_ball_radius(self):
        return max((r.ball_radius for r in self.records), default=0.0)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])


def rayleigh_ritz(p, Y, deflated=None):
    """Solve ``(Y^T W Y) O = (Y^T D Y) O Lambda`` and return ``(Y O, Lambda)`` descending.

    ``deflated=None`` uses the pencil's own deflation state.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    eta = p.use_eta(deflated)
    A = Y.T @ (p.W.matrix @ Y)
    if eta is not None:
        v = eta @ Y
        A = A - np.outer(v, v)
    B = Y.T @ (p.d[:, None] * Y)
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    try:
        lam, O = sla.eigh(A, B)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise RankError(f"Y^T D Y is singular: {exc}") from None
    order = np.argsort(-lam, kind="stable")
    return Y @ O[:, order], lam[order]


def init_embedding(p, K, seed=0, radius=None, deflated=None):
    """Uniform ``[-r, r]`` entries with ``max_i |D_i^{1/2} Y_i| < radius / 2``.

    ``radius`` is in solver units; by default the theory radius ``n * 2 sqrt(M1)``.
    """
    if radius is None:
        radius = step_constants(p, K, 1, deflated=deflated).radius_solver
    r = 0.5 * radius / np.sqrt(K * p.d.max()) * (1.0 - 1e-9)
    rng = np.random.default_rng(seed)
    return rng.uniform(-r, r, size=(p.n, K))


def f1_residual(p, Y):
    """``|(I - D^{-1} W) Y - Y M|_F`` with ``M`` the reduced Rayleigh quotient; zero on invariant subspaces."""
    WY = p.W.matrix @ Y
    R = Y - WY / p.d[:, None]
    B = Y.T @ (p.d[:, None] * Y)
    M = np.linalg.solve(B, Y.T @ (p.d[:, None] * Y - WY))
    return float(np.linalg.norm(R - Y @ M))


def _neighborhood_size(p, batch):
    cols, _ = p.W.row_block(batch)
    return cols.size


def run_solver(
    p,
    K,
    objective="f2",
    scheme="full",
    plan=None,
    alpha=None,
    epochs=100,
    tol=0.0,
    Y0=None,
    seed=0,
    deflated=None,
    counter=None,
    record_every=1,
    callback=None,
    fast=None,
):
    """Cyclic batch descent on f2 (or the normalized f1 baseline).

    Stops after ``epochs`` or when the f2 gradient norm (f1: relative iterate
    change over the last reported chunk) falls below ``tol``. ``alpha=None``
    uses the theory step for f2. ``fast`` selects the compiled full-scheme
    loop; ``None`` enables it for f2-full runs without a work counter.
    ``callback(record, emb)`` may add entries to ``record.extra``; a true
    return value stops the run after that record.
    """
    if objective not in ("f1", "f2"):
        raise InputError(f"objective must be 'f1' or 'f2', got {objective!r}")
    if scheme not in SCHEMES:
        raise InputError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if epochs < 0:
        raise InputError("epochs must be >= 0")
    if record_every < 1:
        raise InputError("record_every must be >= 1")
    n = p.n
    if plan is None:
        plan = BatchPlan.single(n)
    if plan.n != n:
        raise InputError("batch plan does not cover the pencil")
    if alpha is None:
        if objective != "f2":
            raise InputError("f1 needs an explicit alpha")
        alpha = step_constants(p, K, plan, deflated=deflated).alpha_solver
    if not alpha > 0:
        raise InputError("alpha must be positive")
    if Y0 is None:
        Y0 = init_embedding(p, K, seed=seed, deflated=deflated)
    emb = Embedding.from_array(p, Y0)
    if emb.K != K:
        raise InputError(f"initial Y has {emb.K} columns, expected {K}")
    if deflated is not None and bool(deflated) != p.deflated:
        # caches use the pencil's own eta; pin the requested deflation for this run
        p = Pencil(p.W, p.d, p.use_eta(deflated))
        emb.refresh(p)
    if objective == "f1" and scheme != "local":
        normalize_full(emb, p)
    if fast is None:
        fast = objective == "f2" and scheme == "full" and counter is None and plan.order == "cyclic"
    if fast and not (objective == "f2" and scheme == "full" and plan.order == "cyclic"):
        raise InputError("compiled loop only supports f2 with the full scheme and a cyclic plan")

    report = SolveReport(objective, scheme, float(alpha))
    t0 = time.perf_counter()

    def measure(epoch, ball, madds=0, nbhd=0.0):
        if objective == "f2":
            # a non-finite value is turned into DivergenceError by the caller
            with np.errstate(over="ignore", invalid="ignore"):
                val = f2_value(p, emb.Y)
                g = float(np.linalg.norm(f2_grad_full_matrix(p, emb.Y)))
        else:
            val = f1_value(p, emb.Y)
            g = f1_residual(p, emb.Y)
        rec = EpochRecord(epoch, val, g, ball, time.perf_counter() - t0, madds, nbhd)
        stop = bool(callback(rec, emb)) if callback is not None else False
        report.records.append(rec)
        if stop:
            report.converged = True
        return rec

    rec = measure(0, ball_radius(p, emb.Y))
    if epochs == 0 or report.converged:
        return emb, report
    if objective == "f2" and tol > 0 and rec.grad_norm < tol:
        report.converged = True
        return emb, report

    if fast:
        return _run_fast(p, emb, plan, alpha, epochs, tol, record_every, report, measure)

    step = f2_step if objective == "f2" else f1_batch_step
    iteration = 0
    epoch = 0
    Y_prev = emb.Y.copy()
    ball = 0.0
    madds0 = counter.madds if counter is not None else 0
    nbhd_sum, nbhd_cnt = 0, 0
    while epoch < epochs:
        if scheme == "neighbor":
            emb.refresh(p)
        ball = max(ball, ball_radius(p, emb.Y))
        for batch in plan.epoch():
            try:
                step(emb, p, batch, alpha, scheme, counter=counter, iteration=iteration)
            except DivergenceError as exc:
                exc.report = report
                raise
            iteration += 1
            rows = emb.Y[batch]
            with np.errstate(over="ignore", invalid="ignore"):
                ball = max(ball, float(np.sqrt(np.max(p.d[batch] * np.sum(rows * rows, axis=1)))))
            if counter is not None:
                nbhd_sum += _neighborhood_size(p, batch)
                nbhd_cnt += 1
        epoch += 1
        if epoch % record_every and epoch != epochs:
            continue
        madds = (counter.madds - madds0) if counter is not None else 0
        rec = measure(epoch, ball, madds, nbhd_sum / nbhd_cnt if nbhd_cnt else 0.0)
        ball, nbhd_sum, nbhd_cnt = 0.0, 0, 0
        if counter is not None:
            madds0 = counter.madds
        if not np.isfinite(rec.objective):
            raise DivergenceError("non-finite objective", iteration=iteration, report=report)
        if report.converged:
            break
        if tol > 0:
            if objective == "f2" and rec.grad_norm < tol:
                report.converged = True
                break
            if objective == "f1":
                change = np.linalg.norm(emb.Y - Y_prev) / max(np.linalg.norm(Y_prev), 1e-300)
                if change < tol:
                    report.converged = True
                    break
        Y_prev = emb.Y.copy()
    if scheme != "full":
        emb.refresh(p)
    return emb, report


def _run_fast(p, emb, plan, alpha, epochs, tol, record_every, report, measure):
    from ._kernels import f2_full_epochs_csr, f2_full_epochs_dense

    W = p.W.matrix
    eta = p.eta if p.eta is not None else np.zeros(p.n)
    batches = plan.batches
    batch_idx = np.concatenate(batches).astype(np.int64)
    batch_ptr = np.concatenate([[0], np.cumsum([b.size for b in batches])]).astype(np.int64)
    common = (p.d, eta, p.eta is not None)
    if W.nnz * 4 >= p.n * p.n and p.n <= DENSE_KERNEL_CAP:
        kernel, head = f2_full_epochs_dense, (np.ascontiguousarray(W.toarray()[batch_idx]),) + common
    else:
        head = (W.indptr.astype(np.int64), W.indices.astype(np.int64), W.data) + common
        kernel = f2_full_epochs_csr
    Y = np.ascontiguousarray(emb.Y)
    done = 0
    while done < epochs:
        chunk = min(record_every, epochs - done)
        ran, ball_sq, ok = kernel(*head, Y, batch_idx, batch_ptr, float(alpha), int(chunk))
        emb.Y = Y
        emb.refresh(p)
        done += ran
        if not ok:
            raise DivergenceError(
                f"non-finite iterate in epoch {done + 1}", iteration=done * len(plan), report=report
            )
        rec = measure(done, float(np.sqrt(ball_sq)))
        if report.converged:
            break
        if tol > 0 and rec.grad_norm < tol:
            report.converged = True
            break
    return emb, report


def save_embedding(Y, path):
    """Text checkpoint: header ``n K`` then one row of K values per line."""
    Y = np.asarray(Y, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{Y.shape[0]} {Y.shape[1]}\n")
        for row in Y:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_embedding(path):
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError("empty embedding file", "line 1")
    head = lines[0].split()
    try:
        if len(head) != 2:
            raise ValueError
        n, K = int(head[0]), int(head[1])
        if n < 1 or K < 1:
            raise ValueError
    except ValueError:
        raise ParseError(f"malformed header {lines[0]!r}; expected 'n K'", "line 1") from None
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != n:
        raise ParseError(f"expected {n} rows, found {len(body)}", f"line {len(lines)}")
    Y = np.empty((n, K))
    for i, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != K:
            raise ParseError(f"expected {K} values", f"line {i + 2}")
        try:
            Y[i] = [float(v) for v in parts]
        except ValueError:
            raise ParseError(f"malformed value in {ln!r}", f"line {i + 2}") from None
    if not np.all(np.isfinite(Y)):
        raise ParseError("non-finite value in embedding")
    return Y
