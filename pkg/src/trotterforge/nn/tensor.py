"""Reverse-mode autodiff over float64 numpy arrays.

The primitive set is deliberately small: affine ops, elementwise arithmetic,
tanh, exp/log/sqrt, reductions, reshape/transpose/concat, softmax and
log-softmax, embedding lookup, and take-along-last-axis.  That covers MLPs,
layer normalization, scaled dot-product attention, and every loss in the
package.  Graphs are built eagerly; ``backward`` runs an iterative
topological sweep (policy-sampling graphs reach ~1e5 nodes, so no recursion).
"""

from __future__ import annotations

import contextlib

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (inference fast path)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, size in enumerate(shape) if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A float64 array with an optional gradient slot and graph linkage."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    # Make numpy defer mixed ndarray-Tensor arithmetic to the reflected
    # operators below instead of building object arrays.
    __array_ufunc__ = None

    def __init__(self, value, requires_grad: bool = False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _lift(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(other)

    @staticmethod
    def _node(value, parents, backward) -> "Tensor":
        out = Tensor(value)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def item(self) -> float:
        return float(self.value.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    # -- elementwise arithmetic ------------------------------------------------

    def __add__(self, other):
        other = Tensor._lift(other)
        out_value = self.value + other.value

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.shape))

        return Tensor._node(out_value, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            if self.requires_grad:
                self._accumulate(-g)

        return Tensor._node(-self.value, (self,), backward)

    def __sub__(self, other):
        return self + (-Tensor._lift(other))

    def __rsub__(self, other):
        return Tensor._lift(other) + (-self)

    def __mul__(self, other):
        other = Tensor._lift(other)
        out_value = self.value * other.value

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.value, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.value, other.shape))

        return Tensor._node(out_value, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor._lift(other)
        out_value = self.value / other.value

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g / other.value, self.shape))
            if other.requires_grad:
                other._accumulate(
                    _unbroadcast(-g * self.value / other.value**2, other.shape)
                )

        return Tensor._node(out_value, (self, other), backward)

    def __rtruediv__(self, other):
        return Tensor._lift(other) / self

    def __pow__(self, exponent: float):
        out_value = self.value**exponent

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * exponent * self.value ** (exponent - 1))

        return Tensor._node(out_value, (self,), backward)

    # -- transcendental --------------------------------------------------------

    def exp(self):
        out_value = np.exp(self.value)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * out_value)

        return Tensor._node(out_value, (self,), backward)

    def log(self):
        def backward(g):
            if self.requires_grad:
                self._accumulate(g / self.value)

        return Tensor._node(np.log(self.value), (self,), backward)

    def sqrt(self):
        out_value = np.sqrt(self.value)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * 0.5 / out_value)

        return Tensor._node(out_value, (self,), backward)

    def tanh(self):
        out_value = np.tanh(self.value)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * (1.0 - out_value**2))

        return Tensor._node(out_value, (self,), backward)

    def maximum(self, floor: float):
        mask = self.value > floor

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * mask)

        return Tensor._node(np.maximum(self.value, floor), (self,), backward)

    # -- matmul ----------------------------------------------------------------

    def __matmul__(self, other):
        other = Tensor._lift(other)
        a, b = self.value, other.value
        if a.ndim < 2 or b.ndim < 2:
            raise ValueError("matmul operands must have ndim >= 2")
        out_value = a @ b

        def backward(g):
            if self.requires_grad:
                ga = g @ np.swapaxes(b, -1, -2)
                self._accumulate(_unbroadcast(ga, a.shape))
            if other.requires_grad:
                gb = np.swapaxes(a, -1, -2) @ g
                other._accumulate(_unbroadcast(gb, b.shape))

        return Tensor._node(out_value, (self, other), backward)

    # -- reductions ------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out_value = self.value.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            if not self.requires_grad:
                return
            if axis is None:
                self._accumulate(np.broadcast_to(g, self.shape).copy())
                return
            if not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.shape).copy())

        return Tensor._node(out_value, (self,), backward)

    def mean(self, axis=None, keepdims: bool = False):
        count = (
            self.value.size
            if axis is None
            else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- shape -----------------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old_shape = self.shape

        def backward(g):
            if self.requires_grad:
                self._accumulate(g.reshape(old_shape))

        return Tensor._node(self.value.reshape(shape), (self,), backward)

    def transpose(self, axes: tuple[int, ...]):
        inverse = tuple(int(i) for i in np.argsort(axes))

        def backward(g):
            if self.requires_grad:
                self._accumulate(g.transpose(inverse))

        return Tensor._node(self.value.transpose(axes), (self,), backward)

    def swap_last_axes(self):
        axes = tuple(range(self.ndim - 2)) + (self.ndim - 1, self.ndim - 2)
        return self.transpose(axes)

    # -- backward driver ---------------------------------------------------------

    def backward(self) -> None:
        """Reverse-mode sweep seeding d(self)/d(self) = 1; self must be scalar."""
        if self.value.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {self.shape}")
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    tensors = [Tensor._lift(t) for t in tensors]
    out_value = np.concatenate([t.value for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for tensor, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if tensor.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(start, stop)
                tensor._accumulate(g[tuple(index)])

    return Tensor._node(out_value, tuple(tensors), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    out_value = exp / exp.sum(axis=axis, keepdims=True)

    def backward(g):
        if x.requires_grad:
            inner = (g * out_value).sum(axis=axis, keepdims=True)
            x._accumulate(out_value * (g - inner))

    return Tensor._node(out_value, (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out_value = shifted - log_norm

    def backward(g):
        if x.requires_grad:
            x._accumulate(g - np.exp(out_value) * g.sum(axis=axis, keepdims=True))

    return Tensor._node(out_value, (x,), backward)


def embedding(weight: Tensor, indices: np.ndarray) -> Tensor:
    """Row lookup ``weight[indices]``; gradient scatters with accumulation."""
    indices = np.asarray(indices, dtype=np.int64)
    out_value = weight.value[indices]

    def backward(g):
        if weight.requires_grad:
            grad_w = np.zeros_like(weight.value)
            np.add.at(grad_w, indices, g)
            weight._accumulate(grad_w)

    return Tensor._node(out_value, (weight,), backward)


def take_along_last(x: Tensor, indices: np.ndarray) -> Tensor:
    """Pick one entry along the last axis per leading position."""
    indices = np.asarray(indices, dtype=np.int64)
    expanded = indices[..., None]
    out_value = np.take_along_axis(x.value, expanded, axis=-1)[..., 0]

    def backward(g):
        if x.requires_grad:
            grad_x = np.zeros_like(x.value)
            np.put_along_axis(grad_x, expanded, g[..., None], axis=-1)
            x._accumulate(grad_x)

    return Tensor._node(out_value, (x,), backward)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis."""
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def backward(g):
        if x.requires_grad:
            grad_x = np.zeros_like(x.value)
            grad_x[index] = g
            x._accumulate(grad_x)

    return Tensor._node(x.value[index], (x,), backward)


def gelu(x: Tensor) -> Tensor:
    """tanh-approximation GELU, composed from primitives."""
    cubic = x * x * x
    inner = (x + 0.044715 * cubic) * 0.7978845608028654
    return 0.5 * (x * (1.0 + inner.tanh()))
