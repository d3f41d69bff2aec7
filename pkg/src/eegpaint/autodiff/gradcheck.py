from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tape, Tensor


def grad_check(f: Callable[[Tensor], Tensor], x, eps: float = 1e-5) -> float:
    """Max relative error between taped and central-difference gradients.

    ``f`` maps a tensor to a scalar tensor and must work both on a taped
    variable and on a constant.  Runs in float64.  The relative error per
    coordinate is ``|a - b| / max(1e-8, |a| + |b|)``.
    """
    x = np.array(x, dtype=np.float64)
    tape = Tape()
    xv = tape.variable(x)
    analytic = tape.backward(f(xv))[xv].astype(np.float64)
    numeric = np.empty_like(x)
    flat = x.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(Tensor(x.copy())).item()
        flat[i] = orig - eps
        lo = f(Tensor(x.copy())).item()
        flat[i] = orig
        numeric.reshape(-1)[i] = (hi - lo) / (2 * eps)
    a, b = analytic.reshape(-1), numeric.reshape(-1)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))))
