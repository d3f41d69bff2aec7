from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState):
    """One bias-corrected Adam update.

    Returns new parameter arrays (inputs are left untouched) and the state,
    which is advanced in place.
    """
    for k, p in params.items():
        if k in grads and np.shape(grads[k]) != np.shape(p):
            raise ShapeMismatch(f"gradient for {k} has shape {np.shape(grads[k])}, parameter {np.shape(p)}")
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    out = {}
    for k, p in params.items():
        if k not in grads:
            out[k] = p
            continue
        g = np.asarray(grads[k], dtype=p.dtype)
        m = state.m.get(k)
        v = state.v.get(k)
        m = (1 - state.beta1) * g if m is None else state.beta1 * m + (1 - state.beta1) * g
        v = (1 - state.beta2) * g * g if v is None else state.beta2 * v + (1 - state.beta2) * g * g
        m = m.astype(p.dtype, copy=False)
        v = v.astype(p.dtype, copy=False)
        state.m[k], state.v[k] = m, v
        m_hat = m / c1
        v_hat = v / c2
        out[k] = (p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype, copy=False)
    return out, state
