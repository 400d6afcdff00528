"""Adam with bias correction, applied per real component.

Complex parameters are treated as pairs of real parameters: the second
moment of the real part lives in ``v.real`` and that of the imaginary part
in ``v.imag``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dmace.errors import ShapeError


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def _sq(g):
    if np.iscomplexobj(g):
        return g.real**2 + 1j * g.imag**2
    return g**2


def _ratio(m, v, eps):
    if np.iscomplexobj(m):
        return m.real / (np.sqrt(v.real) + eps) + 1j * (m.imag / (np.sqrt(v.imag) + eps))
    return m / (np.sqrt(v) + eps)


def adam_step(params: dict, grads: dict, state: AdamState) -> dict:
    """Return updated parameters; ``state`` is advanced in place."""
    for name, p in params.items():
        g = grads[name]
        if np.shape(g) != np.shape(p):
            raise ShapeError(f"gradient for {name!r} has shape {np.shape(g)}, parameter {np.shape(p)}")
        if name in state.m and state.m[name].shape != np.shape(p):
            raise ShapeError(f"optimizer state for {name!r} does not match parameter shape")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    out = {}
    for name, p in params.items():
        g = np.asarray(grads[name])
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(g)
            v = np.zeros_like(g)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * _sq(g)
        state.m[name], state.v[name] = m, v
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        out[name] = p - state.lr * _ratio(mhat, vhat, state.eps)
    return out
