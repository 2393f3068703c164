"""Fully connected ReLU network with hand-written reverse mode."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InputError, ParseError


@dataclass(eq=False)
class MlpParams:
    """Weights ``W_l`` (out x in) and biases ``b_l``; ReLU between layers, affine output."""

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise InputError("need one bias per weight matrix and at least one layer")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise InputError(f"layer {l}: bias shape {b.shape} does not match weight {W.shape}")
            if l and W.shape[1] != self.weights[l - 1].shape[0]:
                raise InputError(f"layer {l} input {W.shape[1]} != previous output {self.weights[l - 1].shape[0]}")

    @property
    def sizes(self):
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def arrays(self):
        """Flat list of parameter arrays (weights and biases interleaved), shared with the optimizer."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self):
        return MlpParams([W.copy() for W in self.weights], [b.copy() for b in self.biases])


def init_mlp(sizes, seed=0):
    """Uniform ``[-sqrt(6 / fan_in), sqrt(6 / fan_in)]`` weights, zero biases."""
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise InputError(f"invalid layer sizes {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def _check_input(params, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != params.weights[0].shape[1]:
        raise InputError(f"input dimension {X.shape[1]} != network input {params.weights[0].shape[1]}")
    return X


def forward_trace(params, X):
    """Output and the list of layer inputs needed for backprop."""
    A = _check_input(params, X)
    acts = [A]
    last = len(params.weights) - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        Z = A @ W.T + b
        A = Z if l == last else np.maximum(Z, 0.0)
        acts.append(A)
    return A, acts


def mlp_forward(params, X):
    return forward_trace(params, X)[0]


def backward(params, acts, G):
    """Gradients of ``tr(Y^T G)`` given the forward trace; returns arrays aligned with ``params.arrays``."""
    grads = [None] * (2 * len(params.weights))
    dZ = G
    for l in range(len(params.weights) - 1, -1, -1):
        A_in = acts[l]
        grads[2 * l] = dZ.T @ A_in
        grads[2 * l + 1] = dZ.sum(axis=0)
        if l:
            dA = dZ @ params.weights[l]
            dZ = dA * (acts[l] > 0)
    return grads


def train_grad(params, X, G):
    """``d/dtheta tr(Y(theta)^T G)`` with ``G`` held constant."""
    G = np.asarray(G, dtype=float)
    if not np.all(np.isfinite(G)):
        raise InputError("G must be finite")
    Y, acts = forward_trace(params, X)
    if G.shape != Y.shape:
        raise InputError(f"G shape {G.shape} != output shape {Y.shape}")
    return backward(params, acts, G)


def save_mlp(params, path, xi=None):
    """Header ``sizes ...``; per layer the weight rows then the bias row; optional ``xi K`` block."""
    with open(path, "w") as fh:
        fh.write("sizes " + " ".join(str(s) for s in params.sizes) + "\n")
        for W, b in zip(params.weights, params.biases):
            for row in W:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
            fh.write(" ".join(repr(float(v)) for v in b) + "\n")
        if xi is not None:
            fh.write(f"xi {xi.shape[0]}\n")
            for row in xi:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_mlp(path):
    """Returns ``(params, xi)``; ``xi`` is None when the file has no orthogonalization block."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("sizes "):
        raise ParseError("missing 'sizes' header", "line 1")
    try:
        sizes = [int(v) for v in lines[0].split()[1:]]
    except ValueError:
        raise ParseError("malformed layer sizes", "line 1") from None
    if len(sizes) < 2 or min(sizes) < 1:
        raise ParseError("need at least two positive layer sizes", "line 1")
    pos = 1

    def row(width):
        nonlocal pos
        if pos >= len(lines):
            raise ParseError("unexpected end of file", f"line {pos + 1}")
        try:
            vals = np.array([float(v) for v in lines[pos].split()])
        except ValueError:
            raise ParseError("malformed value", f"line {pos + 1}") from None
        if vals.size != width:
            raise ParseError(f"expected {width} values, found {vals.size}", f"line {pos + 1}")
        pos += 1
        return vals

    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(np.vstack([row(fan_in) for _ in range(fan_out)]))
        biases.append(row(fan_out))
    xi = None
    if pos < len(lines) and lines[pos].startswith("xi "):
        K = int(lines[pos].split()[1])
        pos += 1
        xi = np.vstack([row(K) for _ in range(K)])
    if any(ln.strip() for ln in lines[pos:]):
        raise ParseError("trailing data", f"line {pos + 1}")
    return MlpParams(weights, biases), xi
