from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError


@dataclass(eq=False)
class AdamState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def like(cls, arrays, **kw):
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **kw)


def adam_update(arrays, state, grads, lr):
    """Bias-corrected Adam step applied in place to ``arrays``; returns ``(arrays, state)``."""
    if not lr >= 0:
        raise InputError("learning rate must be nonnegative")
    if len(grads) != len(arrays):
        raise InputError("one gradient per parameter array required")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        a -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return arrays, state
