"""Tensor with a reverse-mode tape.

Every differentiable primitive is a :class:`Function` subclass with a numpy
``forward`` and a ``backward`` that returns one gradient per tensor input.
Values are 64-bit floats throughout."""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np

from ..errors import ShapeError

_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, 'enabled', True)


@contextmanager
def no_grad():
    """Forward passes inside the block record no graph (per thread)."""
    previous = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


class Tensor:
    __slots__ = ('data', 'grad', '_ctx', 'requires_grad', 'name')
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._ctx: Function | None = None
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def _wrap(cls, array: np.ndarray) -> Tensor:
        out = cls.__new__(cls)
        out.data = np.asarray(array, dtype=np.float64)
        out.grad, out._ctx, out.requires_grad, out.name = None, None, False, None
        return out

    def __repr__(self):
        label = f" {self.name}" if self.name else ''
        fn = f" grad_fn={type(self._ctx).__name__}" if self._ctx is not None else ''
        return f"Tensor{label}(shape={self.shape}{fn})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        from .functional import add
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from .functional import add, neg
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        from .functional import add, neg
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        from .functional import mul
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from .functional import neg
        return neg(self)

    def __matmul__(self, other):
        from .functional import matmul
        return matmul(self, other)

    def __getitem__(self, index):
        from .functional import getitem
        return getitem(self, index)

    def reshape(self, *shape) -> Tensor:
        from .functional import reshape
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return reshape(self, shape)

    def sum(self, axis=None, keepdims: bool = False) -> Tensor:
        from .functional import sum_
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> Tensor:
        from .functional import mean
        return mean(self, axis=axis, keepdims=keepdims)

    # backward -------------------------------------------------------------
    def _topological_order(self) -> list[Tensor]:
        order, visited = [], set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node._ctx is not None:
                for parent in reversed(node._ctx.parents):
                    if id(parent) not in visited:
                        stack.append((parent, False))
        return order

    def backward(self, grad=None, retain_graph: bool = False):
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every leaf with
        ``requires_grad``. A non-scalar output needs an explicit seed *grad*."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward on shape {self.shape} needs an explicit output gradient")
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.shape:
            raise ShapeError(f"seed gradient {grad.shape} does not match output {self.shape}")

        order = self._topological_order()
        pending: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(order):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            ctx = node._ctx
            if ctx is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            parent_grads = ctx.backward(ctx, g)
            if not isinstance(parent_grads, tuple):
                parent_grads = (parent_grads,)
            for parent, pg in zip(ctx.parents, parent_grads):
                if pg is None or not (parent.requires_grad or parent._ctx is not None):
                    continue
                pg = _undo_broadcast(pg, parent.shape)
                key = id(parent)
                pending[key] = pg if key not in pending else pending[key] + pg
            if not retain_graph:
                node._ctx = None


class Parameter(Tensor):
    """Trainable leaf tensor."""
    __slots__ = ()

    def __init__(self, data, name: str | None = None):
        super().__init__(data, requires_grad=True, name=name)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _undo_broadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    if grad.shape != shape:
        raise ShapeError(f"gradient {grad.shape} cannot be reduced to {shape}")
    return grad


class Function:
    """One recorded op. ``forward(ctx, *arrays, **options)`` returns an array;
    ``backward(ctx, grad)`` returns a gradient (or None) per tensor input.
    Anything backward needs goes on *ctx* as attributes."""

    def __init__(self, *parents: Tensor):
        self.parents = parents

    @classmethod
    def apply(cls, *inputs, **options) -> Tensor:
        tensors = tuple(as_tensor(t) for t in inputs)
        ctx = cls(*tensors)
        out = Tensor._wrap(cls.forward(ctx, *(t.data for t in tensors), **options))
        if grad_enabled() and any(t.requires_grad or t._ctx is not None for t in tensors):
            out._ctx = ctx
        return out

    @staticmethod
    def forward(ctx, *args, **options) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def backward(ctx, grad: np.ndarray):
        raise NotImplementedError
