from __future__ import annotations

import numpy as np
import pytest

from specnet.errors import DivergenceError, InputError, ParseError, RankError
from specnet.graph import SparseSym
from specnet.la import (
    BatchPlan,
    Pencil,
    WorkCounter,
    init_embedding,
    load_embedding,
    rayleigh_ritz,
    run_solver,
    save_embedding,
    step_constants,
)
from specnet.oracle import relative_error, subspace_error

from conftest import random_affinity, random_pencil


def clustered_pencil(rng, n, deflate=True):
    lab = np.arange(n) % 2
    A = random_affinity(rng, n, density=0.6, diag=0.0)
    A = A * np.where(lab[:, None] == lab[None, :], 1.0, 0.02)
    return Pencil.from_affinity(SparseSym(A), deflate=deflate)


def test_zero_epochs_returns_initial_state(rng):
    p = random_pencil(rng, 12)
    Y0 = rng.standard_normal((12, 2))
    emb, rep = run_solver(p, 2, Y0=Y0, epochs=0, alpha=0.1)
    assert np.array_equal(emb.Y, Y0)
    assert len(rep.records) == 1 and rep.records[0].epoch == 0


def test_argument_checks(rng):
    p = random_pencil(rng, 8)
    with pytest.raises(InputError):
        run_solver(p, 2, objective="f3")
    with pytest.raises(InputError):
        run_solver(p, 2, scheme="global")
    with pytest.raises(InputError):
        run_solver(p, 2, epochs=-1)
    with pytest.raises(InputError):
        run_solver(p, 2, objective="f1")
    with pytest.raises(InputError):
        run_solver(p, 2, Y0=np.ones((8, 3)), alpha=0.1)


@pytest.mark.parametrize("deflate", [True, False])
def test_rayleigh_ritz_recovers_eigenpairs(rng, deflate):
    n, K = 30, 3
    p = random_pencil(rng, n, deflate=deflate)
    eig = p.oracle()
    lam, V = eig.leading(K)
    Q = np.linalg.qr(rng.standard_normal((K, K)))[0]
    scale = np.diag(rng.uniform(0.5, 2.0, K))
    U, mu = rayleigh_ritz(p, V @ scale @ Q)
    assert np.allclose(mu, lam, atol=1e-10)
    for j in range(K):
        assert relative_error(V[:, j], U[:, j]) < 1e-8


def test_rayleigh_ritz_is_rotation_invariant(rng):
    p = random_pencil(rng, 20)
    Y = rng.standard_normal((20, 3))
    Q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
    _, a = rayleigh_ritz(p, Y)
    _, b = rayleigh_ritz(p, Y @ Q)
    assert np.allclose(a, b, atol=1e-12)


def test_rayleigh_ritz_single_column_is_quotient(rng):
    p = random_pencil(rng, 15, deflate=False)
    y = rng.standard_normal(15)
    _, lam = rayleigh_ritz(p, y)
    W = p.dense_w()
    assert lam[0] == pytest.approx(y @ W @ y / (y @ (p.d * y)), rel=1e-12)


def test_rayleigh_ritz_rank_deficient(rng):
    p = random_pencil(rng, 10)
    y = rng.standard_normal(10)
    with pytest.raises(RankError):
        rayleigh_ritz(p, np.column_stack([y, y]))


def test_init_inside_ball(rng):
    p = random_pencil(rng, 25)
    c = step_constants(p, 2, 1)
    Y = init_embedding(p, 2, seed=4)
    rows = np.sqrt(p.d * np.sum(Y * Y, axis=1))
    assert rows.max() < c.radius_solver / 2


@pytest.mark.parametrize("scheme", ["full", "neighbor", "local"])
def test_theory_step_stays_in_ball(rng, scheme):
    p = random_pencil(rng, 20)
    plan = BatchPlan.random(20, 3, seed=0)
    c = step_constants(p, 2, plan)
    _, rep = run_solver(p, 2, scheme=scheme, plan=plan, epochs=300, seed=1, record_every=50)
    assert rep.alpha == pytest.approx(c.alpha_solver)
    assert rep.max_ball_radius < c.radius_solver


def test_f2_full_converges_with_fixed_step(rng):
    n, K = 30, 2
    p = clustered_pencil(rng, n)
    eig = p.oracle()
    plan = BatchPlan.contiguous(n, 5)
    Y0 = rng.uniform(-1, 1, (n, K))
    emb, rep = run_solver(p, K, plan=plan, alpha=0.5, epochs=4000, Y0=Y0, tol=1e-10, record_every=100)
    assert rep.records[-1].objective == pytest.approx(-np.sum(eig.eigenvalues[:K] ** 2), rel=1e-8)
    U, lam = rayleigh_ritz(p, emb.Y)
    assert np.allclose(lam, eig.eigenvalues[:K], atol=1e-6)
    assert subspace_error(eig.eigenvectors[:, :K], emb.Y, p.d) < 1e-5


def test_f2_objective_decreases_monotonically_at_theory_step(rng):
    p = random_pencil(rng, 12)
    _, rep = run_solver(p, 2, epochs=200, seed=0, record_every=10)
    vals = rep.column("objective")
    assert np.all(np.diff(vals) <= 1e-15 * np.abs(vals[:-1]).max())


def test_fast_and_python_paths_agree(rng):
    for density in (0.1, 0.9):
        p = random_pencil(rng, 40, density=density)
        plan = BatchPlan.random(40, 6, seed=5)
        Y0 = rng.uniform(-1, 1, (40, 3))
        a, ra = run_solver(p, 3, plan=plan, alpha=0.5, epochs=30, Y0=Y0, fast=True, record_every=10)
        b, rb = run_solver(p, 3, plan=plan, alpha=0.5, epochs=30, Y0=Y0, fast=False, record_every=10)
        assert np.allclose(a.Y, b.Y, atol=1e-11)
        assert np.allclose(ra.column("objective"), rb.column("objective"), rtol=1e-10)


def test_neighbor_and_full_runs_agree(rng):
    p = random_pencil(rng, 60, density=0.05)
    plan = BatchPlan.random(60, 4, seed=2)
    Y0 = rng.uniform(-1, 1, (60, 2))
    a, _ = run_solver(p, 2, scheme="full", plan=plan, alpha=0.5, epochs=20, Y0=Y0, fast=False)
    b, _ = run_solver(p, 2, scheme="neighbor", plan=plan, alpha=0.5, epochs=20, Y0=Y0)
    assert np.allclose(a.Y, b.Y, atol=1e-11)


def test_counter_and_neighborhood_recorded(rng):
    p = random_pencil(rng, 40, density=0.05)
    c = WorkCounter()
    plan = BatchPlan.random(40, 4, seed=0)
    _, rep = run_solver(p, 2, scheme="neighbor", plan=plan, alpha=0.1, epochs=2, counter=c)
    assert rep.records[1].madds > 0 and rep.records[1].mean_neighborhood >= 4
    assert c.steps == 2 * len(plan)


def test_callback_can_stop(rng):
    p = random_pencil(rng, 10)
    seen = []

    def cb(rec, emb):
        seen.append(rec.epoch)
        return rec.epoch >= 3

    _, rep = run_solver(p, 1, alpha=0.1, epochs=50, callback=cb, fast=False)
    assert seen == [0, 1, 2, 3] and rep.converged


def test_divergence_carries_partial_report(rng):
    p = random_pencil(rng, 10)
    with pytest.raises(DivergenceError) as info:
        run_solver(p, 2, alpha=1e6, epochs=1000, Y0=np.ones((10, 2)), fast=False)
    assert info.value.report is not None and info.value.report.records


def test_f1_neighbor_reaches_cycle_invariant_subspace(rng):
    # Each batch step is linear in Y and normalization only right-multiplies Y,
    # so the limit span is the dominant invariant subspace of the epoch operator.
    n, K = 40, 2
    p = clustered_pencil(rng, n, deflate=False)
    plan = BatchPlan.random(n, 4, seed=0)
    alpha = 0.5
    P = p.dense_w() / p.d[:, None]
    M = np.eye(n)
    for b in plan.batches:
        E = np.zeros((n, n))
        E[b, b] = 1.0
        M = (np.eye(n) - 2 * alpha * E @ (np.eye(n) - P)) @ M
    mu, V = np.linalg.eig(M)
    top = np.argsort(-np.abs(mu))[:K]
    ref = np.real(V[:, top])
    emb, _ = run_solver(p, K, objective="f1", scheme="neighbor", plan=plan, alpha=alpha, epochs=300,
                        Y0=rng.standard_normal((n, K)))
    gram = emb.Y.T @ (p.d[:, None] * emb.Y)
    assert np.allclose(gram, n * n * np.eye(K), rtol=1e-8, atol=1e-6)
    assert subspace_error(ref, emb.Y, np.ones(n)) < 1e-8
    # the batch bias vanishes only for a single full batch
    eig = p.oracle()
    assert subspace_error(eig.eigenvectors[:, :K], emb.Y, p.d) < 0.1


def test_embedding_round_trip(tmp_path, rng):
    Y = rng.standard_normal((7, 3))
    path = tmp_path / "emb.txt"
    save_embedding(Y, path)
    assert np.array_equal(load_embedding(path), Y)


@pytest.mark.parametrize(
    "text",
    ["", "3\n1\n2\n3\n", "2 1\n1.0\n", "2 1\n1.0\nx\n", "2 2\n1 2\n3\n", "0 1\n"],
)
def test_embedding_parse_errors(tmp_path, text):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(ParseError):
        load_embedding(path)
