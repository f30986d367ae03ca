"""Minimal reverse-mode automatic differentiation on numpy arrays.

Only the operations needed by the dense networks and the training
objective are implemented. All data is float64.
"""

import numpy as np


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """Node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def _accum(self, grad):
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64, copy=True)
        else:
            self.grad += grad

    def backward(self, grad=None):
        """Backpropagate `grad` (defaults to ones) from this node."""
        if grad is None:
            grad = np.ones_like(self.data)
        topo, seen = [], set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            topo.append(t)

        visit(self)
        self.grad = np.array(grad, dtype=np.float64, copy=True)
        for t in reversed(topo):
            if t._backward is not None and t.grad is not None:
                t._backward(t.grad)

    # -- helpers ------------------------------------------------------

    @staticmethod
    def _wrap(x):
        return x if isinstance(x, Tensor) else Tensor(x)

    @staticmethod
    def _node(data, parents, backward):
        out = Tensor(data)
        if any(p.requires_grad or p._parents for p in parents):
            out._parents = tuple(parents)
            out._backward = backward
            out.requires_grad = True
        return out

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        other = self._wrap(other)
        a, b = self, other

        def bwd(g):
            a._accum(_unbroadcast(g, a.data.shape))
            b._accum(_unbroadcast(g, b.data.shape))

        return self._node(a.data + b.data, (a, b), bwd)

    __radd__ = __add__

    def __neg__(self):
        a = self
        return self._node(-a.data, (a,), lambda g: a._accum(-g))

    def __sub__(self, other):
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return self._wrap(other) + (-self)

    def __mul__(self, other):
        other = self._wrap(other)
        a, b = self, other

        def bwd(g):
            a._accum(_unbroadcast(g * b.data, a.data.shape))
            b._accum(_unbroadcast(g * a.data, b.data.shape))

        return self._node(a.data * b.data, (a, b), bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._wrap(other)
        a, b = self, other

        def bwd(g):
            a._accum(_unbroadcast(g / b.data, a.data.shape))
            b._accum(_unbroadcast(-g * a.data / b.data ** 2, b.data.shape))

        return self._node(a.data / b.data, (a, b), bwd)

    def __matmul__(self, other):
        other = self._wrap(other)
        a, b = self, other

        def bwd(g):
            a._accum(g @ b.data.T)
            b._accum(a.data.T @ g)

        return self._node(a.data @ b.data, (a, b), bwd)

    # -- elementwise --------------------------------------------------

    def relu(self):
        a = self
        mask = a.data > 0
        return self._node(a.data * mask, (a,), lambda g: a._accum(g * mask))

    def exp(self):
        a = self
        out_data = np.exp(a.data)
        return self._node(out_data, (a,), lambda g: a._accum(g * out_data))

    def log(self):
        a = self
        return self._node(np.log(a.data), (a,), lambda g: a._accum(g / a.data))

    def square(self):
        a = self
        return self._node(a.data ** 2, (a,), lambda g: a._accum(2.0 * g * a.data))

    def abs(self):
        a = self
        sign = np.sign(a.data)
        return self._node(np.abs(a.data), (a,), lambda g: a._accum(g * sign))

    def sigmoid(self):
        a = self
        s = np.where(a.data >= 0,
                     1.0 / (1.0 + np.exp(-np.abs(a.data))),
                     np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))
        return self._node(s, (a,), lambda g: a._accum(g * s * (1.0 - s)))

    def softplus(self):
        """log(1 + exp(x)), numerically stable."""
        a = self
        out_data = np.logaddexp(0.0, a.data)
        s = np.where(a.data >= 0,
                     1.0 / (1.0 + np.exp(-np.abs(a.data))),
                     np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))
        return self._node(out_data, (a,), lambda g: a._accum(g * s))

    def clip(self, lo, hi):
        """Clamp values; gradient passes through only inside [lo, hi]."""
        a = self
        mask = (a.data >= lo) & (a.data <= hi)
        return self._node(np.clip(a.data, lo, hi), (a,), lambda g: a._accum(g * mask))

    # -- reductions / shaping -----------------------------------------

    def sum(self, axis=None, keepdims=False):
        a = self
        out_data = a.data.sum(axis=axis, keepdims=keepdims)

        def bwd(g):
            if axis is None:
                a._accum(np.broadcast_to(g, a.data.shape))
            else:
                if not keepdims:
                    g = np.expand_dims(g, axis)
                a._accum(np.broadcast_to(g, a.data.shape))

        return self._node(out_data, (a,), bwd)

    def mean(self, axis=None, keepdims=False):
        a = self
        count = a.data.size if axis is None else a.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def __getitem__(self, key):
        a = self

        def bwd(g):
            full = np.zeros_like(a.data)
            np.add.at(full, key, g)
            a._accum(full)

        return self._node(a.data[key], (a,), bwd)


def concat(tensors, axis=1):
    tensors = [Tensor._wrap(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            t._accum(g[tuple(idx)])

    return Tensor._node(data, tuple(tensors), bwd)
