from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from ..graph import SparseSym, deflation_vector, degree
from ..oracle import dense_gevp


@dataclass(eq=False)
class Pencil:
    """Generalized eigenproblem ``(W - eta eta^T, D)``; ``eta is None`` disables deflation."""

    W: SparseSym
    d: np.ndarray
    eta: np.ndarray | None = None
    _oracle: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_affinity(cls, W, deflate=True):
        if not isinstance(W, SparseSym):
            W = SparseSym(W)
        d = degree(W)
        return cls(W, d, deflation_vector(d) if deflate else None)

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        if self.d.shape != (self.W.n,):
            raise InputError("degree vector does not match W")
        if self.eta is not None:
            self.eta = np.asarray(self.eta, dtype=float)

    @property
    def n(self):
        return self.W.n

    @property
    def deflated(self):
        return self.eta is not None

    def use_eta(self, deflated=None):
        """The deflation vector to apply, or ``None``."""
        if deflated is None:
            return self.eta
        if deflated and self.eta is None:
            return deflation_vector(self.d)
        return self.eta if deflated else None

    def dense_w(self, deflated=None):
        A = self.W.toarray()
        eta = self.use_eta(deflated)
        if eta is not None:
            A = A - np.outer(eta, eta)
        return A

    def oracle(self, deflated=None, method="lapack"):
        """Dense eigendecomposition of the (optionally deflated) pencil, cached."""
        key = (self.use_eta(deflated) is not None, method)
        if key not in self._oracle:
            self._oracle[key] = dense_gevp(self.dense_w(deflated), self.d, method=method)
        return self._oracle[key]


@dataclass(eq=False)
class Embedding:
    """Iterate ``Y`` with caches ``C = Y^T D Y`` and ``u = eta^T Y``."""

    Y: np.ndarray
    C: np.ndarray
    u: np.ndarray
    fresh: bool = True

    @classmethod
    def from_array(cls, p, Y):
        Y = np.array(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.shape[0] != p.n or Y.shape[1] < 1:
            raise InputError(f"Y must be (n, K) with n={p.n}, got {Y.shape}")
        emb = cls(Y, np.zeros((Y.shape[1],) * 2), np.zeros(Y.shape[1]))
        return emb.refresh(p)

    @property
    def K(self):
        return self.Y.shape[1]

    def refresh(self, p):
        self.C = self.Y.T @ (p.d[:, None] * self.Y)
        eta = p.eta if p.eta is not None else np.zeros(p.n)
        self.u = eta @ self.Y
        self.fresh = True
        return self

    def copy(self):
        return Embedding(self.Y.copy(), self.C.copy(), self.u.copy(), self.fresh)


def _n_batches(n, size):
    if size < 1 or n < 1:
        raise InputError("batch size and n must be >= 1")
    return -(-n // size)


@dataclass(eq=False)
class BatchPlan:
    """Partition of ``[0, n)`` into disjoint batches visited once per epoch."""

    batches: list
    order: str = "cyclic"
    seed: int = 0

    def __post_init__(self):
        if self.order not in ("cyclic", "reshuffle"):
            raise InputError("order must be 'cyclic' or 'reshuffle'")
        self.batches = [np.sort(np.asarray(b, dtype=np.int64)) for b in self.batches]
        if not self.batches or any(b.size == 0 for b in self.batches):
            raise InputError("batches must be non-empty")
        allidx = np.concatenate(self.batches)
        if np.unique(allidx).size != allidx.size or allidx.min() != 0 or allidx.max() != allidx.size - 1:
            raise InputError("batches must partition [0, n)")
        self._rng = np.random.default_rng(self.seed)

    @classmethod
    def contiguous(cls, n, size, order="cyclic", seed=0):
        """``ceil(n / size)`` consecutive batches whose sizes differ by at most one."""
        return cls(np.array_split(np.arange(n), _n_batches(n, size)), order, seed)

    @classmethod
    def random(cls, n, size, seed=0, order="cyclic"):
        """As :meth:`contiguous` but over a seeded permutation of the nodes."""
        perm = np.random.default_rng(seed).permutation(n)
        return cls(np.array_split(perm, _n_batches(n, size)), order, seed)

    @classmethod
    def single(cls, n):
        return cls([np.arange(n)])

    @property
    def n(self):
        return sum(b.size for b in self.batches)

    @property
    def max_size(self):
        return max(b.size for b in self.batches)

    def __len__(self):
        return len(self.batches)

    def epoch(self):
        """Batches for one epoch. Reshuffle mode re-partitions with the plan's RNG."""
        if self.order == "cyclic":
            return list(self.batches)
        perm = self._rng.permutation(self.n)
        out, start = [], 0
        for b in self.batches:
            out.append(np.sort(perm[start:start + b.size]))
            start += b.size
        return out
