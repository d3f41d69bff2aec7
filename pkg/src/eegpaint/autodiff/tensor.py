"""Tensors and the tape that records operations for reverse-mode gradients."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import NotScalar, TapeConsumed


class Tensor:
    """A dense array, optionally attached to a :class:`Tape`.

    Float arrays keep their dtype; anything else becomes float32.  Tensors not
    attached to a tape are constants: operations on them are evaluated but
    not recorded.
    """

    __slots__ = ("data", "tape", "index")
    __array_priority__ = 100

    def __init__(self, data, dtype=None):
        if dtype is None:
            arr = np.asarray(data)
            dtype = arr.dtype if arr.dtype.kind == "f" else np.float32
        self.data = np.asarray(data, dtype=dtype)
        self.tape = None
        self.index = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __repr__(self):
        where = "const" if self.tape is None else f"tape#{self.index}"
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, {where})"

    # operator sugar; implementations live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)


BackwardFn = Callable[[np.ndarray, tuple], tuple]


class Tape:
    """Append-only record of operations.

    ``variable`` registers a leaf to differentiate with respect to; every op
    touching a taped tensor appends a node ``(input indices, backward)``.
    ``backward`` walks the nodes once in reverse and may be called only once.
    """

    def __init__(self):
        self._inputs: list[tuple] = []
        self._backward: list[BackwardFn | None] = []
        self._shapes: list[tuple] = []
        self._dtypes: list = []
        self.variables: list[Tensor] = []
        self.consumed = False

    def __len__(self):
        return len(self._inputs)

    def variable(self, value, dtype=None) -> Tensor:
        t = Tensor(np.array(value, dtype=dtype, copy=True) if dtype is not None else np.array(value, copy=True))
        if t.data.dtype.kind != "f":
            t.data = t.data.astype(np.float32)
        self._append(t, (), None)
        self.variables.append(t)
        return t

    def record(self, data: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
        out = Tensor(data)
        self._append(out, tuple(x.index if x.tape is self else None for x in inputs), backward)
        return out

    def _append(self, t: Tensor, inputs, backward):
        if self.consumed:
            raise TapeConsumed("tape already used for backward")
        t.tape = self
        t.index = len(self._inputs)
        self._inputs.append(inputs)
        self._backward.append(backward)
        self._shapes.append(t.data.shape)
        self._dtypes.append(t.data.dtype)

    def backward(self, loss: Tensor) -> dict:
        """Gradients of scalar ``loss`` for every variable, keyed by variable.

        Variables that do not influence ``loss`` get zero arrays.
        """
        if self.consumed:
            raise TapeConsumed("backward already ran on this tape")
        if loss.tape is not self:
            raise ValueError("loss was not recorded on this tape")
        if loss.data.size != 1:
            raise NotScalar(f"loss must be scalar, got shape {loss.shape}")
        self.consumed = True
        grads: list[np.ndarray | None] = [None] * len(self._inputs)
        grads[loss.index] = np.ones(loss.shape, dtype=loss.dtype)
        for i in range(loss.index, -1, -1):
            g = grads[i]
            fn = self._backward[i]
            if g is None or fn is None:
                continue
            inputs = self._inputs[i]
            needs = tuple(j is not None for j in inputs)
            in_grads = fn(g, needs)
            for j, gj in zip(inputs, in_grads):
                if j is None or gj is None:
                    continue
                gj = np.asarray(gj, dtype=self._dtypes[j]).reshape(self._shapes[j])
                grads[j] = gj.copy() if grads[j] is None else grads[j] + gj
            grads[i] = None
        out = {}
        for v in self.variables:
            g = grads[v.index]
            out[v] = np.zeros(v.shape, dtype=v.dtype) if g is None else g
        return out


def backward(loss: Tensor, tape: Tape) -> dict:
    return tape.backward(loss)
