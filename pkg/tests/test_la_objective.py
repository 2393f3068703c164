from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specnet.errors import InputError, StateError
from specnet.graph import SparseSym
from specnet.la import (
    Embedding,
    Pencil,
    WorkCounter,
    f1_value,
    f2_grad_batch,
    f2_grad_full_matrix,
    f2_value,
    hessian_quadratic_form,
)
from specnet.la.objective import local_pencil
from specnet.oracle import finite_diff_grad

from conftest import path3, random_pencil


def two_node():
    return Pencil.from_affinity(SparseSym(np.ones((2, 2))), deflate=False)


def naive_f2(p, Y):
    n = p.n
    Wd = p.dense_w()
    D = np.diag(p.d)
    C = Y.T @ D @ Y
    return np.trace(-2 * Y.T @ Wd @ Y + C @ C / n**2) / n**2


def test_f2_two_node_example():
    p = two_node()
    Y = np.ones((2, 1))
    # (1/4)(-8 + 4) = -1 = -lambda_1^2
    assert f2_value(p, Y) == pytest.approx(-1.0, abs=1e-15)
    assert np.allclose(f2_grad_full_matrix(p, Y), 0.0, atol=1e-15)
    assert f2_value(p, np.zeros((2, 1))) == 0.0
    assert np.array_equal(f2_grad_full_matrix(p, np.zeros((2, 3))), np.zeros((2, 3)))


@pytest.mark.parametrize("deflate", [True, False])
def test_f2_matches_dense_evaluation(rng, deflate):
    p = random_pencil(rng, 20, deflate=deflate)
    Y = rng.standard_normal((20, 3)) * 5
    assert f2_value(p, Y) == pytest.approx(naive_f2(p, Y), rel=1e-12)


@pytest.mark.parametrize("deflate", [True, False])
def test_gradient_is_n_times_true_gradient(rng, deflate):
    p = random_pencil(rng, 12, deflate=deflate)
    Y = rng.standard_normal((12, 3)) * 4
    fd = finite_diff_grad(lambda Z: p.n * f2_value(p, Z), Y, h=1e-5)
    G = f2_grad_full_matrix(p, Y)
    assert np.linalg.norm(G - fd) / np.linalg.norm(fd) < 1e-6


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(3, 15), K=st.integers(1, 3), deflate=st.booleans())
def test_gradient_property(seed, n, K, deflate):
    rng = np.random.default_rng(seed)
    p = random_pencil(rng, n, deflate=deflate)
    Y = rng.standard_normal((n, K)) * n ** 0.5
    fd = finite_diff_grad(lambda Z: p.n * f2_value(p, Z), Y, h=1e-5)
    G = f2_grad_full_matrix(p, Y)
    assert np.linalg.norm(G - fd) <= 1e-6 * max(np.linalg.norm(fd), 1e-8)


def _second_difference(p, Y, S, h):
    return (f2_value(p, Y + h * S) - 2 * f2_value(p, Y) + f2_value(p, Y - h * S)) / h**2


def test_hessian_matches_second_differences(rng):
    for _ in range(5):
        p = random_pencil(rng, 12)
        Y = rng.standard_normal((12, 2)) * 4
        S = rng.standard_normal((12, 2))
        # f2 is quartic along a line, so Richardson on two step sizes cancels the h^2 term
        h = 1e-2
        d1 = _second_difference(p, Y, S, h)
        d2 = _second_difference(p, Y, S, h / 2)
        fd = (4 * d2 - d1) / 3
        H = hessian_quadratic_form(p, Y, S)
        assert abs(H - fd) <= 1e-5 * abs(fd)


def test_hessian_at_zero(rng):
    p = random_pencil(rng, 10)
    S = rng.standard_normal((10, 2))
    expected = -4 * np.trace(S.T @ (p.dense_w() / p.n) @ S) / p.n
    assert hessian_quadratic_form(p, np.zeros((10, 2)), S) == pytest.approx(expected, rel=1e-12)


def _emb(p, Y):
    return Embedding.from_array(p, Y)


def test_full_batch_equals_full_matrix(rng):
    p = random_pencil(rng, 30)
    Y = rng.standard_normal((30, 3))
    G = f2_grad_batch(p, _emb(p, Y), np.arange(30), "full")
    assert np.allclose(G, f2_grad_full_matrix(p, Y), rtol=0, atol=1e-14)


@pytest.mark.parametrize("deflate", [True, False])
def test_neighbor_equals_full_with_fresh_caches(rng, deflate):
    p = random_pencil(rng, 200, deflate=deflate, density=0.03)
    Y = rng.standard_normal((200, 3))
    emb = _emb(p, Y)
    batch = np.sort(rng.choice(200, 7, replace=False))
    a = f2_grad_batch(p, emb, batch, "full")
    b = f2_grad_batch(p, emb, batch, "neighbor")
    assert np.abs(a - b).max() < 1e-12


def test_local_scheme_on_whole_set_is_exact(rng):
    p = random_pencil(rng, 15)
    Y = rng.standard_normal((15, 2))
    G = f2_grad_batch(p, _emb(p, Y), np.arange(15), "local")
    assert np.allclose(G, f2_grad_full_matrix(p, Y), atol=1e-13)


def test_local_scheme_differs_on_sparse_subbatch():
    p = Pencil.from_affinity(path3(), deflate=False)
    Y = np.array([[1.0], [2.0], [3.0]])
    batch = np.array([0, 2])
    local = f2_grad_batch(p, _emb(p, Y), batch, "local")
    full = f2_grad_batch(p, _emb(p, Y), batch, "full")
    assert not np.allclose(local, full)


def test_local_pencil_recomputes_degrees():
    W = SparseSym(np.array([[1.0, 0.5, 0.2], [0.5, 1.0, 0.0], [0.2, 0.0, 1.0]]))
    p = Pencil.from_affinity(W)
    Wbb, dloc, eta = local_pencil(p, np.array([0, 1]))
    assert np.array_equal(Wbb, [[1.0, 0.5], [0.5, 1.0]])
    assert np.array_equal(dloc, [1.5, 1.5])
    assert np.allclose(eta, dloc / np.sqrt(3.0))


def test_batch_errors(rng):
    p = random_pencil(rng, 10)
    emb = _emb(p, rng.standard_normal((10, 2)))
    with pytest.raises(InputError):
        f2_grad_batch(p, emb, [0, 1], "nearby")
    emb.C = None
    with pytest.raises(StateError):
        f2_grad_batch(p, emb, [0, 1], "neighbor")


def test_work_counter_neighbor_is_independent_of_n(rng):
    counts = []
    for n in (100, 400):
        p = random_pencil(rng, n, density=0.0)
        emb = _emb(p, rng.standard_normal((n, 2)))
        c = WorkCounter()
        f2_grad_batch(p, emb, np.array([10, 11]), "neighbor", counter=c)
        counts.append(c.madds)
    assert counts[0] == counts[1]
    c = WorkCounter()
    f2_grad_batch(p, emb, np.array([10, 11]), "full", counter=c)
    assert c.madds > counts[1]


def test_f1_value_at_constrained_optimum(rng):
    p = random_pencil(rng, 20, deflate=False)
    eig = p.oracle()
    K = 3
    Y = p.n * eig.eigenvectors[:, :K]
    assert f1_value(p, Y) == pytest.approx(K - eig.eigenvalues[:K].sum(), abs=1e-12)
