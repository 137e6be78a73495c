"""Dense float64 tensors with a dynamically built reverse-mode graph.

Every differentiable op records its parents and a closure mapping the upstream
gradient to one gradient per parent. ``backward`` walks the graph once in
reverse topological order. Leaves accumulate into ``.grad`` across calls, so
callers zero them between optimizer steps.
"""

from __future__ import annotations

import numpy as np

from crest.errors import DomainError, NumericError, ShapeError
from crest.numgraph import special


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    # make ndarray (op) Tensor defer to Tensor's reflected operators
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False):
        self.data = np.array(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @classmethod
    def _op(cls, data, parents, backward):
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    # -- basic protocol ---------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def T(self):
        return self.transpose()

    def numpy(self):
        return self.data

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def item(self):
        if self.data.size != 1:
            raise ValueError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    # -- backward ---------------------------------------------------------
    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() needs an explicit gradient for shape {self.shape}")
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=np.float64)

        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        grads = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            node.grad = g
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # -- elementwise arithmetic ------------------------------------------
    def __add__(self, other):
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor._op(
            self.data + other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)),
        )

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor._op(
            self.data - other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)),
        )

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data
        return Tensor._op(
            a * b,
            (self, other),
            lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data
        out = a / b
        return Tensor._op(
            out,
            (self, other),
            lambda g: (_unbroadcast(g / b, a.shape), _unbroadcast(-g * out / b, b.shape)),
        )

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __neg__(self):
        return Tensor._op(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, exponent):
        if isinstance(exponent, Tensor):
            raise TypeError("only constant exponents are supported")
        p = float(exponent)
        a = self.data
        return Tensor._op(a**p, (self,), lambda g: (g * p * a ** (p - 1.0),))

    def __abs__(self):
        a = self.data
        return Tensor._op(np.abs(a), (self,), lambda g: (g * np.sign(a),))

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))

    def __rmatmul__(self, other):
        return matmul(as_tensor(other), self)

    def __getitem__(self, index):
        a_shape = self.shape

        def backward(g):
            out = np.zeros(a_shape)
            np.add.at(out, index, g)
            return (out,)

        return Tensor._op(self.data[index], (self,), backward)

    # -- unary math -------------------------------------------------------
    def exp(self):
        out = np.exp(self.data)
        return Tensor._op(out, (self,), lambda g: (g * out,))

    def log(self):
        a = self.data
        return Tensor._op(np.log(a), (self,), lambda g: (g / a,))

    def sqrt(self):
        out = np.sqrt(self.data)
        return Tensor._op(out, (self,), lambda g: (0.5 * g / out,))

    def relu(self):
        a = self.data
        return Tensor._op(np.maximum(a, 0.0), (self,), lambda g: (g * (a > 0),))

    def softplus(self):
        a = self.data
        out = np.logaddexp(0.0, a)
        return Tensor._op(out, (self,), lambda g: (g * _sigmoid(a),))

    def digamma(self):
        a = self.data
        return Tensor._op(special.digamma(a), (self,), lambda g: (g * special.trigamma(a),))

    def lgamma(self):
        a = self.data
        return Tensor._op(special.lgamma(a), (self,), lambda g: (g * special.digamma(a),))

    # -- reductions and shape ---------------------------------------------
    def sum(self, axis=None, keepdims=False):
        a_shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, a_shape).copy(),)

        return Tensor._op(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            n = int(np.prod([self.shape[i] for i in axes]))
        return self.sum(axis=axis, keepdims=keepdims) / float(n)

    def max(self, axis=-1, keepdims=False):
        """Maximum along one axis; the gradient goes to the first maximal entry."""
        a = self.data
        idx = np.expand_dims(np.argmax(a, axis=axis), axis)
        out = np.take_along_axis(a, idx, axis=axis)

        def backward(g):
            grad = np.zeros_like(a)
            g = g if keepdims else np.expand_dims(g, axis)
            np.put_along_axis(grad, idx, g, axis=axis)
            return (grad,)

        return Tensor._op(out if keepdims else np.squeeze(out, axis), (self,), backward)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a_shape = self.shape
        return Tensor._op(self.data.reshape(shape), (self,), lambda g: (g.reshape(a_shape),))

    def transpose(self, *axes):
        if not axes:
            axes = tuple(range(self.ndim))[::-1]
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inverse = tuple(np.argsort(axes))
        return Tensor._op(self.data.transpose(axes), (self,), lambda g: (g.transpose(inverse),))

    def swapaxes(self, a, b):
        return Tensor._op(self.data.swapaxes(a, b), (self,), lambda g: (g.swapaxes(a, b),))


def _sigmoid(a):
    return np.exp(-np.logaddexp(0.0, -a))


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def tensor(data, requires_grad=False):
    return Tensor(data, requires_grad=requires_grad)


def matmul(a, b):
    """Matrix product over the last two axes, batch axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}") from exc
    x, y = a.data, b.data

    def backward(g):
        return (
            _unbroadcast(np.matmul(g, y.swapaxes(-1, -2)), x.shape),
            _unbroadcast(np.matmul(x.swapaxes(-1, -2), g), y.shape),
        )

    return Tensor._op(out, (a, b), backward)


def softmax_rows(x, scale=1.0):
    """Softmax along the last axis of ``scale * x`` with max-subtraction."""
    x = as_tensor(x)
    if np.any(np.isnan(x.data)):
        raise NumericError("softmax_rows received NaN input")
    z = scale * x.data
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (scale * out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return Tensor._op(out, (x,), backward)


def log_softmax(x, axis=-1):
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return Tensor._op(out, (x,), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._op(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor._op(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def where(mask, a, b):
    """Select ``a`` where ``mask`` holds, else ``b``; the mask is a constant."""
    mask = np.asarray(mask, dtype=bool)
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._op(
        np.where(mask, a.data, b.data),
        (a, b),
        lambda g: (_unbroadcast(np.where(mask, g, 0.0), a.shape),
                   _unbroadcast(np.where(mask, 0.0, g), b.shape)),
    )


def l2_normalize(x, axis=-1, eps=1e-6):
    x = as_tensor(x)
    # the norm is floored at eps: exact above it, no sqrt(0) gradient below it
    squared = (x * x).sum(axis=axis, keepdims=True)
    floor = eps * eps
    return x / ((squared - floor).relu() + floor).sqrt()


def digamma(x):
    if isinstance(x, Tensor):
        return x.digamma()
    return special.digamma(x)


def lgamma(x):
    if isinstance(x, Tensor):
        return x.lgamma()
    return special.lgamma(x)


def check_finite(t, what="value"):
    data = t.data if isinstance(t, Tensor) else np.asarray(t)
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite {what}")
    return t


def require_positive(x, what="argument"):
    data = x.data if isinstance(x, Tensor) else np.asarray(x)
    if np.any(data <= 0):
        raise DomainError(f"{what} must be positive")
    return x
