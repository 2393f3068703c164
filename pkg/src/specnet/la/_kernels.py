"""Compiled inner loops for full-scheme f2 descent.

Same arithmetic as ``f2_step(..., scheme="full")``; used by ``run_solver``
when many cheap epochs are needed (theory-sized steps are tiny). The dense
variant exists because indirect CSR indexing is several times slower on
small, nearly dense pencils.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _exact_caches(Y, d, eta, use_eta, C, u):
    n, K = Y.shape
    for a in range(K):
        u[a] = 0.0
        for c in range(K):
            C[a, c] = 0.0
    for i in range(n):
        di = d[i]
        for a in range(K):
            ya = di * Y[i, a]
            if use_eta:
                u[a] += eta[i] * Y[i, a]
            for c in range(a, K):
                C[a, c] += ya * Y[i, c]
    for a in range(K):
        for c in range(a):
            C[a, c] = C[c, a]


@njit(cache=True)
def _finish_rows(Y, batch_idx, lo, hi, lin, C, u, d, eta, use_eta, alpha, G, ball):
    """Turn ``lin`` (rows of W Y) into gradient rows, check and apply the step."""
    n, K = Y.shape
    inv_n = 1.0 / n
    inv_n3 = 1.0 / (n * n * n)
    for t in range(lo, hi):
        i = batch_idx[t]
        for k in range(K):
            quad = 0.0
            for a in range(K):
                quad += Y[i, a] * C[a, k]
            v = lin[t - lo, k]
            if use_eta:
                v -= eta[i] * u[k]
            g = -4.0 * inv_n * v + 4.0 * inv_n3 * d[i] * quad
            if not np.isfinite(Y[i, k] - alpha * g):
                return ball, False
            G[t - lo, k] = g
    for t in range(lo, hi):
        i = batch_idx[t]
        s = 0.0
        for k in range(K):
            Y[i, k] -= alpha * G[t - lo, k]
            s += Y[i, k] * Y[i, k]
        s *= d[i]
        if s > ball:
            ball = s
    return ball, True


@njit(cache=True)
def _initial_ball(Y, d):
    n, K = Y.shape
    ball = 0.0
    for i in range(n):
        s = 0.0
        for k in range(K):
            s += Y[i, k] * Y[i, k]
        s *= d[i]
        if s > ball:
            ball = s
    return ball


@njit(cache=True)
def f2_full_epochs_csr(indptr, indices, data, d, eta, use_eta, Y, batch_idx, batch_ptr, alpha, n_epochs):
    """Run ``n_epochs`` cyclic passes in place.

    Returns ``(epochs_done, max_ball_sq, ok)``; ``ok`` is False on a non-finite
    iterate, in which case ``Y`` holds the last finite state.
    """
    n, K = Y.shape
    C = np.zeros((K, K))
    u = np.zeros(K)
    ball = _initial_ball(Y, d)
    nb = batch_ptr.size - 1
    G = np.zeros((n, K))
    lin = np.zeros((n, K))
    for ep in range(n_epochs):
        for b in range(nb):
            _exact_caches(Y, d, eta, use_eta, C, u)
            lo = batch_ptr[b]
            hi = batch_ptr[b + 1]
            for t in range(lo, hi):
                i = batch_idx[t]
                for k in range(K):
                    lin[t - lo, k] = 0.0
                for q in range(indptr[i], indptr[i + 1]):
                    j = indices[q]
                    w = data[q]
                    for k in range(K):
                        lin[t - lo, k] += w * Y[j, k]
            ball, ok = _finish_rows(Y, batch_idx, lo, hi, lin, C, u, d, eta, use_eta, alpha, G, ball)
            if not ok:
                return ep, ball, False
    return n_epochs, ball, True


@njit(cache=True)
def f2_full_epochs_dense(Wrows, d, eta, use_eta, Y, batch_idx, batch_ptr, alpha, n_epochs):
    """Dense twin of :func:`f2_full_epochs_csr`; ``Wrows = W[batch_idx]`` (row-permuted, dense)."""
    n, K = Y.shape
    C = np.zeros((K, K))
    u = np.zeros(K)
    ball = _initial_ball(Y, d)
    nb = batch_ptr.size - 1
    G = np.zeros((n, K))
    for ep in range(n_epochs):
        for b in range(nb):
            _exact_caches(Y, d, eta, use_eta, C, u)
            lo = batch_ptr[b]
            hi = batch_ptr[b + 1]
            lin = Wrows[lo:hi] @ Y
            ball, ok = _finish_rows(Y, batch_idx, lo, hi, lin, C, u, d, eta, use_eta, alpha, G, ball)
            if not ok:
                return ep, ball, False
    return n_epochs, ball, True
