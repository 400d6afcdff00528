"""Reverse-mode differentiation over a small set of complex primitives.

Gradients follow the real-composite convention: for a real loss ``L`` and a
complex leaf ``w = u + iv`` the reported gradient is ``dL/du + i dL/dv``.
With that convention the vector-Jacobian product of a holomorphic map ``f``
is ``conj(f'(x)) * g`` and of a linear map ``A`` is ``A^H g``. Real leaves get
real gradients.

Only the primitives the unfolded networks need are provided. Values are
``numpy`` arrays; batches are carried as columns.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from dmace.errors import ContractError, ShapeError


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Var:
    """Handle to a node on a :class:`Tape`."""

    __slots__ = ("tape", "idx", "value")

    def __init__(self, tape: "Tape", idx: int, value: np.ndarray):
        self.tape = tape
        self.idx = idx
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    @property
    def H(self) -> "Var":
        return self.tape.adjoint(self)

    def __matmul__(self, other):
        return self.tape.matmul(self, other)

    def __rmatmul__(self, other):
        return self.tape.matmul(other, self)

    def __add__(self, other):
        return self.tape.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.tape.sub(self, other)

    def __rsub__(self, other):
        return self.tape.sub(other, self)

    def __neg__(self):
        return self.tape.mul(self, -1.0)

    def __mul__(self, other):
        return self.tape.mul(self, other)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Var(idx={self.idx}, shape={self.value.shape}, dtype={self.value.dtype})"


class Tape:
    """Records one forward pass; :meth:`backward` sweeps it once in reverse."""

    def __init__(self):
        self._values: list[np.ndarray] = []
        self._parents: list[tuple[int, ...]] = []
        self._vjps: list[Callable | None] = []
        self.params: dict[str, int] = {}

    def __len__(self):
        return len(self._values)

    def _push(self, value, parents=(), vjp=None) -> Var:
        idx = len(self._values)
        self._values.append(value)
        self._parents.append(tuple(parents))
        self._vjps.append(vjp)
        return Var(self, idx, value)

    def _lift(self, x) -> Var:
        if isinstance(x, Var):
            if x.tape is not self:
                raise ContractError("variable belongs to another tape")
            return x
        return self.const(x)

    # leaves

    def param(self, value, name: str) -> Var:
        if name in self.params:
            raise ContractError(f"parameter {name!r} registered twice")
        v = self._push(np.array(value, copy=True))
        self.params[name] = v.idx
        return v

    def const(self, value) -> Var:
        return self._push(np.asarray(value))

    # primitives

    def matmul(self, a, b) -> Var:
        a, b = self._lift(a), self._lift(b)
        if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul shapes {a.shape} and {b.shape}")
        av, bv = a.value, b.value

        def vjp(g):
            return g @ bv.conj().T, av.conj().T @ g

        return self._push(av @ bv, (a.idx, b.idx), vjp)

    def adjoint(self, a) -> Var:
        a = self._lift(a)
        if a.value.ndim != 2:
            raise ShapeError("adjoint needs a 2-D value")
        return self._push(a.value.conj().T, (a.idx,), lambda g: (g.conj().T,))

    def add(self, a, b) -> Var:
        a, b = self._lift(a), self._lift(b)
        sa, sb = a.shape, b.shape
        return self._push(a.value + b.value, (a.idx, b.idx), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))

    def sub(self, a, b) -> Var:
        a, b = self._lift(a), self._lift(b)
        sa, sb = a.shape, b.shape
        return self._push(a.value - b.value, (a.idx, b.idx), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))

    def mul(self, a, b) -> Var:
        """Elementwise product with numpy broadcasting (covers scaling)."""
        a, b = self._lift(a), self._lift(b)
        av, bv = a.value, b.value

        def vjp(g):
            return _unbroadcast(np.conj(bv) * g, av.shape), _unbroadcast(np.conj(av) * g, bv.shape)

        return self._push(av * bv, (a.idx, b.idx), vjp)

    def soft_threshold(self, x, eta) -> Var:
        """Complex shrinkage ``x/|x| * (|x| - eta)_+`` with a scalar threshold.

        The subgradient at the kink ``|x| == eta`` is taken as zero.
        """
        x, eta = self._lift(x), self._lift(eta)
        if eta.value.size != 1:
            raise ShapeError("soft_threshold takes a scalar threshold")
        xv = x.value
        e = float(np.real(eta.value).reshape(()))
        mag = np.abs(xv)
        active = mag > e
        safe = np.where(active, mag, 1.0)
        unit = np.where(active, xv / safe, 0.0)
        out = unit * np.where(active, mag - e, 0.0)
        ratio = np.where(active, e / safe, 0.0)
        eshape = eta.shape

        def vjp(g):
            proj = np.real(np.conj(g) * unit)
            gx = np.where(active, (1.0 - ratio) * g + ratio * proj * unit, 0.0)
            geta = np.full(eshape, -proj.sum())
            return gx, geta

        return self._push(out, (x.idx, eta.idx), vjp)

    def sigmoid_phase(self, x) -> Var:
        """``2*pi / (1 + exp(-x))`` on a real input."""
        x = self._lift(x)
        s = 1.0 / (1.0 + np.exp(-np.asarray(x.value, dtype=float)))
        out = 2.0 * np.pi * s
        deriv = 2.0 * np.pi * s * (1.0 - s)
        return self._push(out, (x.idx,), lambda g: (np.real(g) * deriv,))

    def expj(self, x) -> Var:
        """``exp(j x)`` for a real input."""
        x = self._lift(x)
        e = np.exp(1j * np.asarray(x.value, dtype=float))
        # d/dx exp(jx) = j exp(jx); grad = Re(conj(g) * j e)
        return self._push(e, (x.idx,), lambda g: (np.real(np.conj(g) * 1j * e),))

    def colnorm(self, x) -> Var:
        """Euclidean norm of every column, returned as a ``(1, B)`` real row."""
        x = self._lift(x)
        xv = x.value
        if xv.ndim != 2:
            raise ShapeError("colnorm needs a 2-D value")
        n = np.sqrt(np.sum(np.abs(xv) ** 2, axis=0, keepdims=True))
        inv = np.where(n > 0, 1.0 / np.where(n > 0, n, 1.0), 0.0)
        return self._push(n, (x.idx,), lambda g: (xv * (np.real(g) * inv),))

    def sum(self, x) -> Var:
        x = self._lift(x)
        shape = x.shape
        return self._push(np.asarray(x.value.sum()), (x.idx,), lambda g: (np.broadcast_to(g, shape).copy(),))

    def take(self, x, i: int) -> Var:
        """Entry ``i`` of a 1-D value as a 0-d node."""
        x = self._lift(x)
        shape = x.shape

        def vjp(g):
            out = np.zeros(shape, dtype=np.result_type(g, x.value))
            out[i] = g
            return (out,)

        return self._push(np.asarray(x.value[i]), (x.idx,), vjp)

    def real(self, x) -> Var:
        x = self._lift(x)
        return self._push(np.real(x.value).copy(), (x.idx,), lambda g: (np.real(g).astype(complex),))

    # reverse sweep

    def backward(self, loss: Var) -> dict[str, np.ndarray]:
        """Gradients of a real scalar ``loss`` for every registered parameter."""
        loss = self._lift(loss)
        lv = loss.value
        if lv.size != 1 or np.iscomplexobj(lv):
            raise ContractError("backward needs a real scalar loss")
        grads: list[np.ndarray | None] = [None] * (loss.idx + 1)
        grads[loss.idx] = np.ones_like(lv, dtype=float)
        for i in range(loss.idx, -1, -1):
            g = grads[i]
            vjp = self._vjps[i]
            if g is None or vjp is None:
                continue
            for p, gp in zip(self._parents[i], vjp(g)):
                if not np.iscomplexobj(self._values[p]):
                    gp = np.real(gp)
                grads[p] = gp if grads[p] is None else grads[p] + gp
        out = {}
        for name, idx in self.params.items():
            g = grads[idx] if idx < len(grads) else None
            out[name] = np.zeros_like(self._values[idx]) if g is None else np.asarray(g).reshape(self._values[idx].shape)
        return out
