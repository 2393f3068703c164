"""Synthetic moons, MNIST IDX files, and the two-cluster accuracy metric."""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateEmbeddingError, InputError, ParseError
from .graph import PointCloud

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class IdxMagicError(ParseError):
    category = "idx-magic"


class IdxTruncatedError(ParseError):
    category = "idx-truncated"


class IdxCountError(ParseError):
    category = "idx-count"


class IdxLabelError(ParseError):
    category = "idx-label"


def gaussian_pairs(rng, n):
    """``n`` independent 2-D standard normals by Box-Muller on ``rng.random``.

    Two uniforms per point, ``r = sqrt(-2 log(1 - u1))``, angle ``2 pi u2``.
    """
    u = rng.random((n, 2))
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = 2.0 * math.pi * u[:, 1]
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def gen_one_moon(n, noise_var=0.01, seed=0):
    """``x = (cos t, sin t) + xi`` with ``t ~ U[0, pi]``, ``xi ~ N(0, noise_var I)``.

    Draw order: ``n`` uniforms for the angles, then ``2n`` for the noise.
    """
    if n < 1:
        raise InputError("n must be >= 1")
    if noise_var < 0:
        raise InputError("noise_var must be >= 0")
    rng = np.random.default_rng(seed)
    t = math.pi * rng.random(n)
    xi = math.sqrt(noise_var) * gaussian_pairs(rng, n)
    return PointCloud(np.column_stack([np.cos(t), np.sin(t)]) + xi)


def gen_two_moons(n, seed=0, noise_var=0.0036):
    """Interleaved moons; first half labeled 1, second half labeled 2."""
    if n < 2 or n % 2:
        raise InputError(f"two moons needs an even n >= 2 (got {n})")
    if noise_var < 0:
        raise InputError("noise_var must be >= 0")
    rng = np.random.default_rng(seed)
    t = math.pi * rng.random(n)
    xi = math.sqrt(noise_var) * gaussian_pairs(rng, n)
    h = n // 2
    upper = np.column_stack([np.cos(t[:h]) - 0.5, np.sin(t[:h]) - 0.3])
    lower = np.column_stack([-np.cos(t[h:]) + 0.5, -np.sin(t[h:]) + 0.3])
    labels = np.concatenate([np.ones(h, dtype=np.int64), np.full(h, 2, dtype=np.int64)])
    return PointCloud(np.vstack([upper, lower]) + xi, labels)


def write_points_csv(pc, path):
    """Header ``x0,...,x{m-1}`` plus ``label`` when the cloud is labeled."""
    header = [f"x{j}" for j in range(pc.dim)]
    if pc.labels is not None:
        header.append("label")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(pc.n):
            row = [repr(float(v)) for v in pc.points[i]]
            if pc.labels is not None:
                row.append(str(int(pc.labels[i])))
            w.writerow(row)


def read_points_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty point file", "line 1")
    header = rows[0]
    labeled = header[-1] == "label"
    m = len(header) - int(labeled)
    if m < 1 or header[:m] != [f"x{j}" for j in range(m)]:
        raise ParseError(f"unexpected header {','.join(header)!r}", "line 1")
    pts = np.empty((len(rows) - 1, m))
    labels = np.empty(len(rows) - 1, dtype=np.int64)
    for k, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields", f"line {k + 2}")
        try:
            pts[k] = [float(v) for v in row[:m]]
            if labeled:
                labels[k] = int(row[m])
        except ValueError:
            raise ParseError(f"malformed row {','.join(row)!r}", f"line {k + 2}") from None
    return PointCloud(pts, labels if labeled else None)


@dataclass(frozen=True, eq=False)
class MnistSet:
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise InputError("image and label counts differ")

    @property
    def n(self):
        return self.labels.shape[0]

    def subset(self, n, seed=0):
        """First ``n`` samples after a seeded shuffle."""
        if not 1 <= n <= self.n:
            raise InputError(f"subset size must lie in [1, {self.n}]")
        perm = np.random.default_rng(seed).permutation(self.n)[:n]
        return MnistSet(self.images[perm], self.labels[perm])

    def to_point_cloud(self):
        return PointCloud(self.images, self.labels)


def _read_u32(buf, offset):
    if len(buf) < offset + 4:
        raise IdxTruncatedError("file ends inside the header", f"byte {len(buf)}")
    return struct.unpack_from(">I", buf, offset)[0]


def read_idx_images(path):
    """Raw ``(count, rows, cols)`` uint8 array from an IDX image file."""
    buf = Path(path).read_bytes()
    magic = _read_u32(buf, 0)
    if magic != IMAGE_MAGIC:
        raise IdxMagicError(f"image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}", "byte 0")
    count, rows, cols = (_read_u32(buf, off) for off in (4, 8, 12))
    size = count * rows * cols
    if len(buf) < 16 + size:
        raise IdxTruncatedError(f"payload needs {size} bytes, found {len(buf) - 16}", f"byte {len(buf)}")
    if len(buf) > 16 + size:
        raise IdxCountError(f"{len(buf) - 16 - size} trailing bytes after {count} images", f"byte {16 + size}")
    return np.frombuffer(buf, dtype=np.uint8, count=size, offset=16).reshape(count, rows, cols)


def read_idx_labels(path):
    buf = Path(path).read_bytes()
    magic = _read_u32(buf, 0)
    if magic != LABEL_MAGIC:
        raise IdxMagicError(f"label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}", "byte 0")
    count = _read_u32(buf, 4)
    if len(buf) < 8 + count:
        raise IdxTruncatedError(f"payload needs {count} bytes, found {len(buf) - 8}", f"byte {len(buf)}")
    if len(buf) > 8 + count:
        raise IdxCountError(f"{len(buf) - 8 - count} trailing bytes after {count} labels", f"byte {8 + count}")
    labels = np.frombuffer(buf, dtype=np.uint8, count=count, offset=8)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise IdxLabelError(f"label {labels[bad[0]]} outside 0-9", f"byte {8 + bad[0]}")
    return labels


def write_idx_images(images, path):
    images = np.asarray(images)
    if images.ndim != 3 or images.dtype != np.uint8:
        raise InputError("images must be a (count, rows, cols) uint8 array")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, *images.shape))
        fh.write(np.ascontiguousarray(images).tobytes())


def write_idx_labels(labels, path):
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.dtype != np.uint8:
        raise InputError("labels must be a 1-D uint8 array")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, labels.size))
        fh.write(labels.tobytes())


def load_mnist_idx(images_path, labels_path):
    """Images flattened to ``count x rows*cols`` in ``[0, 1]`` (bytes / 255)."""
    raw = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if raw.shape[0] != labels.size:
        raise IdxCountError(f"{raw.shape[0]} images but {labels.size} labels", "byte 4")
    images = raw.reshape(raw.shape[0], -1).astype(float) / 255.0
    return MnistSet(images, labels.astype(np.int64))


def surrogate_digits_idx(directory, n=2000, seed=0):
    """Write MNIST-shaped IDX files built from scikit-learn's bundled 8x8 digits.

    Each 8x8 digit is upsampled to 20x20, placed at a random offset in a 28x28
    frame, and quantized to bytes. Used when real MNIST files are unavailable.
    """
    from scipy.ndimage import zoom
    from sklearn.datasets import load_digits

    digits = load_digits()
    rng = np.random.default_rng(seed)
    pick = rng.integers(0, digits.images.shape[0], size=n)
    out = np.zeros((n, 28, 28), dtype=np.uint8)
    for k, idx in enumerate(pick):
        big = np.clip(zoom(digits.images[idx] / 16.0, 2.5, order=1), 0.0, 1.0)
        r, c = rng.integers(2, 7, size=2)
        out[k, r:r + 20, c:c + 20] = np.round(255 * big).astype(np.uint8)
    labels = digits.target[pick].astype(np.uint8)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    img_path = directory / "images-idx3-ubyte"
    lab_path = directory / "labels-idx1-ubyte"
    write_idx_images(out, img_path)
    write_idx_labels(labels, lab_path)
    return img_path, lab_path


def kmeans_1d(values, seed=None):
    """Optimal two-cluster split of 1-D values; labels 1 (lower) and 2 (upper).

    Solved exactly by sweeping the sorted split points; the optimum is a fixed
    point of Lloyd's iteration. ``seed`` is accepted for interface symmetry and
    unused because the result is deterministic.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 2:
        raise InputError("need at least two values")
    if np.all(x == x[0]):
        raise DegenerateEmbeddingError("all values identical; two clusters undefined")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    n = xs.size
    csum = np.cumsum(xs)
    csq = np.cumsum(xs * xs)
    k = np.arange(1, n)
    left = csq[:-1] - csum[:-1] ** 2 / k
    rs, rq = csum[-1] - csum[:-1], csq[-1] - csq[:-1]
    right = rq - rs**2 / (n - k)
    cost = left + right
    # only split between distinct values
    valid = xs[1:] > xs[:-1]
    cost = np.where(valid, cost, np.inf)
    split = int(np.argmin(cost)) + 1
    labels = np.empty(n, dtype=np.int64)
    labels[order[:split]] = 1
    labels[order[split:]] = 2
    return labels


def clustering_accuracy(pred, truth):
    """``max(m, 1 - m)`` with ``m = mean |pred - truth|`` over labels in {1, 2}."""
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise InputError("prediction and truth lengths differ")
    if pred.size == 0:
        raise InputError("empty labels")
    if not (np.isin(pred, (1, 2)).all() and np.isin(truth, (1, 2)).all()):
        raise InputError("labels must be 1 or 2")
    m = float(np.mean(np.abs(pred - truth)))
    return max(m, 1.0 - m)
