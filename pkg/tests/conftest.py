from __future__ import annotations

import numpy as np
import pytest

from specnet.graph import SparseSym
from specnet.la import Pencil


def random_affinity(rng, n, density=0.3, diag=1.0, low=0.1):
    """Connected random symmetric affinity: a weighted path plus random chords."""
    A = rng.uniform(low, 1.0, (n, n))
    mask = rng.random((n, n)) < density
    A = np.where(mask | mask.T, A, 0.0)
    A = 0.5 * (A + A.T)
    idx = np.arange(n - 1)
    A[idx, idx + 1] = A[idx + 1, idx] = np.maximum(A[idx, idx + 1], 0.5)
    np.fill_diagonal(A, diag)
    return A


def random_pencil(rng, n, deflate=True, **kw):
    return Pencil.from_affinity(SparseSym(random_affinity(rng, n, **kw)), deflate=deflate)


def path3():
    return SparseSym(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> "PASS|FAIL  <number>. <name>: <detail>", filled by the acceptance suite
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
