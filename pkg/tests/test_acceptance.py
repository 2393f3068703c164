"""Acceptance criteria 1-13, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (inline and again in the
terminal summary) and then asserts the same condition. Expensive criteria
measure their own wall time when a runtime bound is part of the claim.
"""
from __future__ import annotations

import os
import struct
import time

import numpy as np
import pytest

from specnet.data import (
    clustering_accuracy,
    gen_one_moon,
    gen_two_moons,
    kmeans_1d,
    load_mnist_idx,
    read_idx_images,
    read_idx_labels,
    surrogate_digits_idx,
    write_idx_images,
    write_idx_labels,
)
from specnet.errors import DivergenceError
from specnet.graph import (
    SparseSym,
    build_gaussian_affinity,
    build_knn_affinity,
    largest_component,
    subgraph,
)
from specnet.la import (
    BatchPlan,
    Embedding,
    Pencil,
    WorkCounter,
    f1_batch_step,
    f1_value,
    f2_grad_full_matrix,
    f2_step,
    f2_value,
    hessian_quadratic_form,
    normalize_full,
    random_orthogonal,
    rayleigh_ritz,
    run_solver,
    saddle_direction,
    saddle_indices,
    stationary_point,
    step_constants,
)
from specnet.nn import NeighborCaches, evaluate_embedding, init_mlp, mlp_forward, train, train_grad
from specnet.oracle import finite_diff_grad, relative_error, subspace_error

from conftest import ACCEPTANCE, random_affinity, random_pencil

pytestmark = pytest.mark.slow


def report(capsys, number, name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {number:2d}. {name}: {detail}"
    ACCEPTANCE[number] = line
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def one_moon_problem(deflate):
    pc = gen_one_moon(500, seed=0)
    W = build_gaussian_affinity(pc, 0.1, 0.6)
    keep = largest_component(W)
    W = subgraph(W, keep)
    return Pencil.from_affinity(W, deflate=deflate), pc.points[keep]


def two_cluster_pencil(rng, n, deflate):
    """Two dense blocks joined by weak edges; a clear gap after the second eigenvalue."""
    lab = np.arange(n) % 2
    w = rng.uniform(0.5, 1.5, (n, n))
    w = 0.5 * (w + w.T)
    W = np.where(lab[:, None] == lab[None, :], w, 0.01 * w)
    np.fill_diagonal(W, 0.0)
    return Pencil.from_affinity(SparseSym(0.25 * W), deflate=deflate)


# ---------------------------------------------------------------- theory


def test_criterion_01_gradient(capsys):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        p = random_pencil(rng, 12, deflate=bool(rng.integers(2)))
        Y = rng.standard_normal((12, 3))
        fd = finite_diff_grad(lambda Z: p.n * f2_value(p, Z), Y, h=1e-5)
        G = f2_grad_full_matrix(p, Y)
        worst = max(worst, np.linalg.norm(G - fd) / np.linalg.norm(fd))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 5.0
    report(capsys, 1, "gradient vs finite differences", ok, f"max rel err {worst:.2e} (< 1e-6), {elapsed:.2f} s (< 5 s)")


def test_criterion_02_hessian(capsys):
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(10):
        n, K = int(rng.integers(5, 30)), int(rng.integers(1, 4))
        p = random_pencil(rng, n)
        Y = rng.standard_normal((n, K))
        S = rng.standard_normal((n, K))

        def second(h):
            return (f2_value(p, Y + h * S) - 2 * f2_value(p, Y) + f2_value(p, Y - h * S)) / h**2

        # Richardson extrapolation removes the h^2 term of the central second difference
        h = 1e-3
        fd = (4 * second(h / 2) - second(h)) / 3
        H = hessian_quadratic_form(p, Y, S)
        worst = max(worst, abs(H - fd) / abs(fd))
    ok = worst < 1e-5
    report(capsys, 2, "Hessian quadratic form vs second differences", ok, f"max rel err {worst:.2e} (< 1e-5)")


def test_criterion_03_landscape(capsys):
    rng = np.random.default_rng(103)
    worst_g, worst_f = 0.0, 0.0
    for _ in range(10):
        n = int(rng.integers(10, 51))
        p = random_pencil(rng, n, deflate=bool(rng.integers(2)))
        eig = p.oracle()
        # the minimizer family needs lambda_K > 0
        K = min(int(rng.integers(1, 5)), int(np.sum(eig.eigenvalues > 0)))
        lam = eig.eigenvalues[:K]
        for _ in range(5):
            Y = stationary_point(eig, range(K), random_orthogonal(K, rng))
            worst_g = max(worst_g, np.linalg.norm(f2_grad_full_matrix(p, Y)) / np.linalg.norm(Y))
            fstar = -np.sum(lam**2)
            worst_f = max(worst_f, abs(f2_value(p, Y) - fstar) / abs(fstar))
    ok = worst_g < 1e-8 and worst_f < 1e-10
    report(capsys, 3, "minimizer family", ok,
           f"max |grad|/|Y| {worst_g:.2e} (< 1e-8), max rel f2 err {worst_f:.2e} (< 1e-10)")


def test_criterion_04_strict_saddle(capsys):
    rng = np.random.default_rng(104)
    worst, sign_ok, checked = 0.0, True, 0
    for _ in range(10):
        n, K = int(rng.integers(8, 40)), int(rng.integers(1, 4))
        p = random_pencil(rng, n)
        eig = p.oracle()
        lam = eig.eigenvalues
        for i in range(K):
            if lam[K] <= 0:
                continue
            Q = random_orthogonal(K, rng)
            Y = stationary_point(eig, saddle_indices(i, K), Q)
            H = hessian_quadratic_form(p, Y, saddle_direction(eig, i, K, Q))
            worst = max(worst, abs(H - (-4 * lam[i] + 4 * lam[K])))
            if lam[i] > lam[K] and not H < 0:
                sign_ok = False
            checked += 1
    ok = worst < 1e-8 and sign_ok and checked > 0
    report(capsys, 4, "strict saddle curvature", ok,
           f"{checked} saddles, max |H - (-4 l_i + 4 l_K+1)| {worst:.2e} (< 1e-8), negative on positive gaps: {sign_ok}")


def test_criterion_05_scheme_identity(capsys):
    rng = np.random.default_rng(105)
    n, K = 200, 3
    p = random_pencil(rng, n, density=0.03)
    plan = BatchPlan.random(n, 8, seed=0)
    Y0 = rng.uniform(-1, 1, (n, K))
    full, nb = Embedding.from_array(p, Y0), Embedding.from_array(p, Y0)
    for it in range(100):
        batch = plan.batches[it % len(plan)]
        f2_step(full, p, batch, 0.5, "full")
        f2_step(nb, p, batch, 0.5, "neighbor")
    diff = float(np.abs(full.Y - nb.Y).max())
    report(capsys, 5, "full and neighbor iterates identical", diff < 1e-12, f"max entry diff {diff:.2e} (< 1e-12)")


def test_criterion_06_global_convergence(capsys):
    rng = np.random.default_rng(106)
    n, K = 50, 2
    t0 = time.perf_counter()
    worst_gap, worst_sub, in_ball, epochs = 0.0, 0.0, True, []
    for trial in range(20):
        p = two_cluster_pencil(rng, n, deflate=False)
        eig = p.oracle()
        fstar = -np.sum(eig.eigenvalues[:K] ** 2)
        plan = BatchPlan.single(n)
        c = step_constants(p, K, plan)
        emb, rep = run_solver(
            p, K, "f2", "full", plan=plan, epochs=20_000_000, seed=trial, record_every=50_000,
            callback=lambda rec, e: rec.objective - fstar < 1e-6,
        )
        worst_gap = max(worst_gap, rep.records[-1].objective - fstar)
        worst_sub = max(worst_sub, subspace_error(eig.eigenvectors[:, :K], emb.Y, p.d))
        in_ball &= rep.max_ball_radius < c.radius_solver
        epochs.append(rep.epochs_completed)
    elapsed = time.perf_counter() - t0
    ok = worst_gap < 1e-6 and worst_sub < 1e-3 and in_ball and elapsed < 60.0
    report(capsys, 6, "global convergence at the theory step", ok,
           f"max gap {worst_gap:.2e} (< 1e-6), max subspace err {worst_sub:.2e} (< 1e-3), "
           f"ball kept: {in_ball}, steps {min(epochs)}-{max(epochs)}, {elapsed:.1f} s (< 60 s)")


def test_criterion_07_f1_baseline(capsys):
    rng = np.random.default_rng(107)
    worst_norm, worst_val = 0.0, 0.0
    for trial in range(4):
        n, K = 50, 2
        p = two_cluster_pencil(rng, n, deflate=False) if trial % 2 else random_pencil(rng, n, deflate=False)
        eig = p.oracle()
        for scheme in ("full", "neighbor"):
            emb = Embedding.from_array(p, rng.standard_normal((n, K)))
            normalize_full(emb, p)
            for batch in BatchPlan.random(n, 5, seed=trial).batches * 3:
                f1_batch_step(emb, p, batch, 0.25, scheme)
                gram = emb.Y.T @ (p.d[:, None] * emb.Y)
                worst_norm = max(worst_norm, np.linalg.norm(gram - n * n * np.eye(K)) / n**2)
        if trial % 2:
            emb, _ = run_solver(p, K, "f1", "full", plan=BatchPlan.single(n), alpha=0.25, epochs=2000,
                                Y0=rng.standard_normal((n, K)))
            fstar = K - np.sum(eig.eigenvalues[:K])
            worst_val = max(worst_val, abs(f1_value(p, emb.Y) - fstar))
    ok = worst_norm < 1e-8 and worst_val < 1e-6
    report(capsys, 7, "f1 normalization and convergence", ok,
           f"max |Y^T D Y - n^2 I|/n^2 {worst_norm:.2e} (< 1e-8), max |f1 - (K - sum l)| {worst_val:.2e} (< 1e-6)")


# ---------------------------------------------------------------- schemes at desk scale


def _final_err(p, K, objective, scheme, alpha, col, ref, epochs):
    plan = BatchPlan.random(p.n, 4, seed=0)
    Y0 = np.random.default_rng(1).uniform(-1, 1, (p.n, K))
    try:
        emb, _ = run_solver(p, K, objective, scheme, plan=plan, alpha=alpha, epochs=epochs, Y0=Y0)
        U, _ = rayleigh_ritz(p, emb.Y)
        return relative_error(ref.eigenvectors[:, col], U[:, col])
    except DivergenceError:
        return 1.0


def test_criterion_08_local_scheme_failure(capsys):
    epochs = 400
    parts, ok = [], True
    pd_, _ = one_moon_problem(deflate=True)
    pu, _ = one_moon_problem(deflate=False)
    setups = (
        ("f2", pd_, 2, 0, 10.0, (0.01, 0.03, 0.1, 0.3)),
        # f1 keeps the constant eigenvector; the first nontrivial one is column 1
        ("f1", pu, 3, 1, 0.5, (0.1, 0.5, 1.0)),
    )
    for obj, p, K, col, a_nb, a_local in setups:
        ref = p.oracle()
        nb = _final_err(p, K, obj, "neighbor", a_nb, col, ref, epochs)
        local = min(_final_err(p, K, obj, "local", a, col, ref, epochs) for a in a_local)
        ok &= local >= 5 * nb
        parts.append(f"{obj}: local {local:.3g} vs neighbor {nb:.3g} (ratio {local / nb:.1f})")
    report(capsys, 8, "local scheme fails where neighbor converges", ok,
           f"n={pd_.n}, {epochs} epochs, " + "; ".join(parts) + " (ratio >= 5)")


# ---------------------------------------------------------------- networks


def test_criterion_09_network_gradient(capsys):
    rng = np.random.default_rng(109)
    params = init_mlp([2, 128, 2], seed=0)
    X = gen_one_moon(4, seed=3).points
    G = rng.standard_normal((4, 2))
    grads = train_grad(params, X, G)
    an, fd = [], []
    for k, a in enumerate(params.arrays):
        for idx in np.ndindex(a.shape):
            orig = a[idx]
            a[idx] = orig + 1e-5
            fp = np.sum(mlp_forward(params, X) * G)
            a[idx] = orig - 1e-5
            fm = np.sum(mlp_forward(params, X) * G)
            a[idx] = orig
            fd.append((fp - fm) / 2e-5)
            an.append(grads[k][idx])
    err = float(np.linalg.norm(np.array(an) - np.array(fd)) / np.linalg.norm(fd))
    report(capsys, 9, "network gradient vs finite differences", err < 1e-5,
           f"{len(an)} parameters, rel err {err:.2e} (< 1e-5)")


def test_criterion_10_one_moon_networks(capsys):
    p, X = one_moon_problem(deflate=True)
    ref = p.oracle()
    t0 = time.perf_counter()
    best = {}
    for scheme in ("neighbor", "full", "local"):
        mins = []
        for seed in range(3):
            params = init_mlp([2, 128, 2], seed=seed)
            errs = []
            train(params, X, p, "specnet2", scheme, batch_size=4, lr=1e-3, epochs=300, seed=seed,
                  callback=lambda ep, prm, o: errs.append(evaluate_embedding(prm, X, p, ref, 1)[0]) if ep else None)
            mins.append(min(errs))
        best[scheme] = mins
    elapsed = time.perf_counter() - t0
    med = {s: float(np.median(v)) for s, v in best.items()}
    ok = med["neighbor"] < 0.1 and med["full"] < 0.1 and med["local"] >= 0.3 and elapsed < 600
    detail = ", ".join(f"{s} {med[s]:.3f} {np.round(best[s], 3).tolist()}" for s in best)
    report(capsys, 10, "SpecNet2 one moon (best rel err within 300 epochs, median of 3 seeds)", ok,
           f"{detail}; need neighbor/full < 0.1, local >= 0.3, {elapsed:.0f} s (< 600 s)")


def _two_moons_accuracy(model, lr):
    pc = gen_two_moons(600, seed=0)
    W = build_gaussian_affinity(pc, 0.15, 0.08)
    p = Pencil.from_affinity(W, deflate=model == "specnet2")
    out = 1 if model == "specnet2" else 2
    col = 0 if model == "specnet2" else 1
    accs = []
    for seed in range(3):
        params = init_mlp([2, 128, out], seed=seed)
        res = train(params, pc.points, p, model, "neighbor", batch_size=4, lr=lr, epochs=200, seed=seed)
        Y = mlp_forward(params, pc.points)
        if res.orth is not None:
            Y = Y @ res.orth.Xi
        U, _ = rayleigh_ritz(p, Y)
        accs.append(clustering_accuracy(kmeans_1d(U[:, col]), pc.labels))
    return np.array(accs)


def test_criterion_11_two_moons(capsys):
    a2 = _two_moons_accuracy("specnet2", 1e-3)
    a1 = _two_moons_accuracy("specnet1", 1e-5)
    ok = a2.mean() >= 0.9 and a2.std() <= a1.std()
    report(capsys, 11, "two moons clustering after 200 epochs", ok,
           f"SpecNet2 acc {np.round(a2, 3).tolist()} mean {a2.mean():.4f} (>= 0.9) std {a2.std():.4f}; "
           f"SpecNet1 acc {np.round(a1, 3).tolist()} std {a1.std():.4f} (SpecNet2 std <= SpecNet1 std)")


def test_criterion_12_mnist_plumbing(capsys, tmp_path):
    # crafted files: parse then rewrite must reproduce the bytes exactly
    img, lab = tmp_path / "img", tmp_path / "lab"
    img.write_bytes(struct.pack(">IIII", 0x803, 2, 2, 2) + bytes([0, 255, 128, 64, 1, 2, 3, 4]))
    lab.write_bytes(struct.pack(">II", 0x801, 2) + bytes([7, 0]))
    write_idx_images(read_idx_images(img), tmp_path / "img2")
    write_idx_labels(read_idx_labels(lab), tmp_path / "lab2")
    bitexact = (tmp_path / "img2").read_bytes() == img.read_bytes() and (tmp_path / "lab2").read_bytes() == lab.read_bytes()

    images = os.environ.get("SPECNET_MNIST_IMAGES")
    labels = os.environ.get("SPECNET_MNIST_LABELS")
    source = "MNIST"
    if not (images and labels):
        images, labels = surrogate_digits_idx(tmp_path / "digits", n=2000, seed=0)
        source = "surrogate digits"
    ms = load_mnist_idx(images, labels).subset(2000, seed=0)
    W = build_knn_affinity(ms.to_point_cloud(), 16)
    sym = (W.matrix != W.matrix.T).nnz == 0
    values_ok = set(np.unique(W.values).tolist()) <= {0.5, 1.0}
    keep = largest_component(W)
    p = Pencil.from_affinity(subgraph(W, keep), deflate=True)
    X = ms.images[keep]
    fstar = -np.sum(p.oracle().eigenvalues[:6] ** 2)
    params = init_mlp([784, 256, 256, 6], seed=0)
    gaps = []
    train(params, X, p, "specnet2", "neighbor", batch_size=2, lr=1e-4, epochs=1, seed=0,
          callback=lambda ep, prm, o: gaps.append(f2_value(p, mlp_forward(prm, X)) - fstar))
    decreased = len(gaps) == 2 and gaps[1] < gaps[0]
    ok = bitexact and sym and values_ok and decreased
    report(capsys, 12, f"MNIST plumbing ({source})", ok,
           f"IDX bit-exact: {bitexact}, W symmetric: {sym}, values in {{0.5, 1}}: {values_ok}, "
           f"f2 gap {gaps[0]:.4f} -> {gaps[-1]:.4f} after one epoch (must decrease)")


# ---------------------------------------------------------------- cost


def test_criterion_13_cost_scaling(capsys):
    per_step = {"neighbor": [], "full": []}
    for scheme in per_step:
        for n in (200, 400, 800):
            p = Pencil.from_affinity(build_knn_affinity(gen_one_moon(n, seed=0), 10), deflate=True)
            c = WorkCounter()
            plan = BatchPlan.random(n, 4, seed=0)
            run_solver(p, 2, "f2", scheme, plan=plan, alpha=1.0, epochs=1, counter=c, seed=0)
            per_step[scheme].append(c.madds / c.steps)
    nb, fu = per_step["neighbor"], per_step["full"]
    flat = max(nb) / min(nb)
    growth = [fu[1] / fu[0], fu[2] / fu[1]]
    ok = flat <= 1.5 and all(1.6 <= g <= 2.4 for g in growth)
    report(capsys, 13, "per-step work scaling", ok,
           f"neighbor madds/step {np.round(nb, 1).tolist()} (max/min {flat:.3f} <= 1.5); "
           f"full {np.round(fu, 0).tolist()} (doubling ratios {growth[0]:.2f}, {growth[1]:.2f} in [1.6, 2.4])")
