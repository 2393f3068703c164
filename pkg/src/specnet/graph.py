"""Affinity graphs: construction, degrees, deflation, batch neighborhoods, COO files."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .errors import InputError, IsolatedNodeError, ParseError

KERNEL_CONVENTIONS = ("half", "unit")


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InputError(f"points must be a non-empty (n, m) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InputError("points contain non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (pts.shape[0],):
                raise InputError("labels must have one entry per point")
            object.__setattr__(self, "labels", lab)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


class SparseSym:
    """Symmetric nonnegative affinity matrix held in canonical CSR form.

    Canonical means: sorted column indices per row, no duplicates, no explicit
    zeros. The underlying ``scipy.sparse.csr_matrix`` is exposed as ``matrix``
    and must be treated as read-only.
    """

    __slots__ = ("matrix", "_diag")

    def __init__(self, matrix, check=True):
        m = sp.csr_matrix(matrix, dtype=float, copy=True)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        if m.shape[0] != m.shape[1]:
            raise InputError(f"affinity must be square, got {m.shape}")
        if check:
            if m.nnz and m.data.min() < 0:
                raise InputError("affinity weights must be nonnegative")
            if not np.all(np.isfinite(m.data)):
                raise InputError("affinity weights must be finite")
            if (m != m.T).nnz:
                raise InputError("affinity matrix is not symmetric")
        self.matrix = m
        self._diag = m.diagonal()

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def nnz(self):
        return self.matrix.nnz

    @property
    def row_ptr(self):
        return self.matrix.indptr

    @property
    def col_idx(self):
        return self.matrix.indices

    @property
    def values(self):
        return self.matrix.data

    @property
    def diagonal(self):
        return self._diag

    def toarray(self):
        return self.matrix.toarray()

    def row_nnz(self, rows):
        ptr = self.matrix.indptr
        rows = np.asarray(rows)
        return int(np.sum(ptr[rows + 1] - ptr[rows]))

    def rows(self, rows):
        """CSR block of the given rows (all columns)."""
        return self.matrix[np.asarray(rows)]

    def block(self, rows, cols):
        """Dense submatrix ``W[rows][:, cols]``."""
        return self.matrix[np.asarray(rows)][:, np.asarray(cols)].toarray()

    def row_block(self, rows):
        """Column support ``N`` of ``rows`` and the dense block ``W[rows][:, N]``."""
        rows = np.asarray(rows, dtype=np.int64)
        ptr, idx, val = self.matrix.indptr, self.matrix.indices, self.matrix.data
        starts, stops = ptr[rows], ptr[rows + 1]
        lens = stops - starts
        if lens.sum() == 0:
            return np.zeros(0, dtype=np.int64), np.zeros((rows.size, 0))
        sel = np.concatenate([np.arange(a, b) for a, b in zip(starts, stops)])
        cols, inv = np.unique(idx[sel], return_inverse=True)
        out = np.zeros((rows.size, cols.size))
        out[np.repeat(np.arange(rows.size), lens), inv] = val[sel]
        return cols, out

    def __eq__(self, other):
        if not isinstance(other, SparseSym) or other.n != self.n:
            return NotImplemented
        a, b = self.matrix, other.matrix
        return (
            np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
        )

    def __repr__(self):
        return f"SparseSym(n={self.n}, nnz={self.nnz})"


def gaussian_kernel(sqdist, sigma, convention="half"):
    if convention == "half":
        return np.exp(-sqdist / (2.0 * sigma * sigma))
    if convention == "unit":
        return np.exp(-sqdist / (sigma * sigma))
    raise InputError(f"unknown kernel convention {convention!r}; expected one of {KERNEL_CONVENTIONS}")


def build_gaussian_affinity(pc, sigma, threshold=0.6, convention="half"):
    """Truncated Gaussian affinity ``W_ij = exp(-|x_i - x_j|^2 / (2 sigma^2))``.

    Entries with kernel value ``<= threshold`` are dropped. The diagonal
    (value 1) is always kept. ``convention="unit"`` uses ``sigma^2`` in the
    denominator instead of ``2 sigma^2``.
    """
    if not isinstance(pc, PointCloud):
        pc = PointCloud(pc)
    if not sigma > 0:
        raise InputError("sigma must be positive")
    if not 0.0 <= threshold < 1.0:
        raise InputError("threshold must lie in [0, 1)")
    n = pc.n
    if threshold > 0:
        scale = 2.0 if convention == "half" else 1.0
        radius = sigma * math.sqrt(-scale * math.log(threshold))
        tree = cKDTree(pc.points)
        # Slightly enlarged radius; the exact kernel test below decides membership.
        pairs = tree.query_pairs(radius * (1 + 1e-9) + 1e-300, output_type="ndarray")
        i, j = pairs[:, 0], pairs[:, 1]
        diff = pc.points[i] - pc.points[j]
        vals = gaussian_kernel(np.einsum("ij,ij->i", diff, diff), sigma, convention)
        keep = vals > threshold
        i, j, vals = i[keep], j[keep], vals[keep]
    else:
        sq = cdist(pc.points, pc.points, "sqeuclidean")
        vals_full = gaussian_kernel(sq, sigma, convention)
        i, j = np.nonzero(np.triu(vals_full > threshold, k=1))
        vals = vals_full[i, j]
    rows = np.concatenate([i, j, np.arange(n)])
    cols = np.concatenate([j, i, np.arange(n)])
    data = np.concatenate([vals, vals, np.ones(n)])
    return SparseSym(sp.coo_matrix((data, (rows, cols)), shape=(n, n)), check=False)


def knn_indices(points, k, chunk=512):
    """Exact k nearest neighbors (self excluded), ties broken by lower index."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        dist = cdist(points[start:stop], points, "sqeuclidean")
        dist[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # stable sort keeps lower column index first among equal distances
        order = np.argsort(dist, axis=1, kind="stable")
        out[start:stop] = order[:, :k]
    return out


def build_knn_affinity(pc, k):
    """Symmetrized kNN graph ``W = (A + A^T) / 2`` with zero diagonal."""
    if not isinstance(pc, PointCloud):
        pc = PointCloud(pc)
    n = pc.n
    if not 1 <= k < n:
        raise InputError(f"k must satisfy 1 <= k < n (k={k}, n={n})")
    nbrs = knn_indices(pc.points, k)
    rows = np.repeat(np.arange(n), k)
    a = sp.csr_matrix((np.ones(n * k), (rows, nbrs.ravel())), shape=(n, n))
    return SparseSym(0.5 * (a + a.T), check=False)


def degree(W):
    d = np.asarray(W.matrix.sum(axis=1)).ravel()
    isolated = np.flatnonzero(d <= 0)
    if isolated.size:
        raise IsolatedNodeError(
            f"{isolated.size} isolated node(s), first at index {isolated[0]}"
        )
    return d


def deflation_vector(d):
    """``eta = d / |sqrt(d)|_2``; removes the constant eigenvector from ``(W, D)``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise InputError("degrees must be positive")
    return d / math.sqrt(d.sum())


def largest_component(W):
    """Sorted node indices of the largest connected component (ties: lowest label)."""
    _, labels = connected_components(W.matrix, directed=False)
    counts = np.bincount(labels)
    return np.flatnonzero(labels == int(np.argmax(counts)))


def subgraph(W, nodes):
    nodes = np.asarray(nodes, dtype=np.int64)
    return SparseSym(W.matrix[nodes][:, nodes], check=False)


def neighborhood(W, batch):
    """Sorted column support of the rows in ``batch``."""
    batch = np.asarray(batch, dtype=np.int64)
    if batch.size == 0:
        raise InputError("batch must be non-empty")
    if batch.min() < 0 or batch.max() >= W.n:
        raise InputError("batch index out of range")
    ptr, idx = W.matrix.indptr, W.matrix.indices
    parts = [idx[ptr[i]:ptr[i + 1]] for i in batch]
    return np.unique(np.concatenate(parts))


def save_coo(W, path):
    """Write ``W`` as text: header ``n nnz`` then ``i j w`` per entry, row-major."""
    m = W.matrix
    rows = np.repeat(np.arange(W.n), np.diff(m.indptr))
    with open(path, "w") as fh:
        fh.write(f"{W.n} {W.nnz}\n")
        for i, j, w in zip(rows, m.indices, m.data):
            fh.write(f"{i} {j} {float(w)!r}\n")


def load_coo(path):
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError("empty graph file", "line 1")
    head = lines[0].split()
    try:
        n, nnz = int(head[0]), int(head[1])
        if len(head) != 2 or n < 1 or nnz < 0:
            raise ValueError
    except (ValueError, IndexError):
        raise ParseError(f"malformed header {lines[0]!r}; expected 'n nnz'", "line 1") from None
    body = [ln for ln in lines[1:]]
    if len(body) < nnz:
        raise ParseError(f"expected {nnz} entries, found {len(body)}", f"line {len(lines) + 1}")
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    for k in range(nnz):
        lineno = k + 2
        parts = body[k].split()
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
            if len(parts) != 3:
                raise ValueError
        except (ValueError, IndexError):
            raise ParseError(f"malformed entry {body[k]!r}", f"line {lineno}") from None
        if not (0 <= i < n and 0 <= j < n):
            raise ParseError(f"index out of range in {body[k]!r}", f"line {lineno}")
        if not (np.isfinite(w) and w >= 0):
            raise ParseError(f"invalid weight in {body[k]!r}", f"line {lineno}")
        rows[k], cols[k], vals[k] = i, j, w
    if any(ln.strip() for ln in body[nnz:]):
        raise ParseError("trailing data after the declared entries", f"line {nnz + 2}")
    lookup = {(int(i), int(j)): (float(w), k + 2) for k, (i, j, w) in enumerate(zip(rows, cols, vals))}
    if len(lookup) != nnz:
        raise ParseError("duplicate entries")
    for (i, j), (w, lineno) in lookup.items():
        mirror = lookup.get((j, i))
        if mirror is None or mirror[0] != w:
            raise ParseError(f"entry ({i}, {j}) has no matching symmetric entry", f"line {lineno}")
    m = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return SparseSym(m, check=False)
