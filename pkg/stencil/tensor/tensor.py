from __future__ import annotations
import threading
import typing as t
from contextlib import contextmanager

import numpy as np

from ..exceptions import ContractError


# Returns one gradient (or None) per parent, given the output's gradient.
BackwardFn = t.Callable[[np.ndarray], t.Sequence[t.Optional[np.ndarray]]]
Axis = t.Union[None, int, t.Tuple[int, ...]]

_grad_mode = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_grad_mode, 'enabled', True)


@contextmanager
def no_grad():
    """Disable graph recording in the current thread (sampling, evaluation)."""
    previous = is_grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


def unbroadcast(grad: np.ndarray, shape: t.Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the shape of the operand it belongs to."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, extent in enumerate(shape) if extent == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A dense float64 array that records the operations applied to it.

    Operations on tensors that require grad build a graph; `backward` walks it
    in reverse and accumulates gradients into the leaves' `grad` buffers.
    """

    # Make numpy defer to the reflected operators (array + tensor -> Tensor).
    __array_ufunc__ = None

    def __init__(self, data: t.Any, requires_grad: bool = False, name: str = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.name = name
        self.grad: t.Optional[np.ndarray] = None
        self._parents: t.Tuple[Tensor, ...] = ()
        self._backward: t.Optional[BackwardFn] = None

    @classmethod
    def from_op(cls, data: np.ndarray, parents: t.Sequence[Tensor], backward: BackwardFn) -> Tensor:
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.name = None
        out.grad = None
        track = is_grad_enabled() and any(parent.requires_grad for parent in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward if track else None
        return out

    # --- convenience ---
    @property
    def shape(self) -> t.Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def detach(self) -> Tensor:
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def __repr__(self) -> str:
        flags = ', requires_grad=True' if self.requires_grad else ''
        name = f', name={self.name}' if self.name else ''
        return f'Tensor(shape={self.shape}{flags}{name})'

    def __len__(self):
        return len(self.data)

    # --- autograd core ---
    def _topological_order(self) -> t.List[Tensor]:
        order: t.List[Tensor] = []
        visited: t.Set[int] = set()
        stack: t.List[t.Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self):
        """Populate `grad` of every leaf this scalar depends on. Repeated calls accumulate.

        :raises ContractError: If this tensor is not a scalar or has no graph.
        """
        if self.data.size != 1:
            raise ContractError(f'backward() needs a scalar, got shape {self.shape}.')
        if not self.requires_grad:
            raise ContractError('backward() called on a tensor that does not require grad.')

        grads: t.Dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(self._topological_order()):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node._backward is None:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad

    # --- elementwise arithmetic ---
    def __add__(self, other) -> Tensor:
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor.from_op(
            self.data + other.data, (self, other),
            lambda g: (unbroadcast(g, a_shape), unbroadcast(g, b_shape))
        )

    __radd__ = __add__

    def __sub__(self, other) -> Tensor:
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor.from_op(
            self.data - other.data, (self, other),
            lambda g: (unbroadcast(g, a_shape), unbroadcast(-g, b_shape))
        )

    def __rsub__(self, other) -> Tensor:
        return as_tensor(other) - self

    def __mul__(self, other) -> Tensor:
        other = as_tensor(other)
        a, b = self, other
        return Tensor.from_op(
            a.data * b.data, (a, b),
            lambda g: (
                unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
                unbroadcast(g * a.data, b.shape) if b.requires_grad else None
            )
        )

    __rmul__ = __mul__

    def __truediv__(self, other) -> Tensor:
        other = as_tensor(other)
        a, b = self, other
        return Tensor.from_op(
            a.data / b.data, (a, b),
            lambda g: (
                unbroadcast(g / b.data, a.shape) if a.requires_grad else None,
                unbroadcast(-g * a.data / (b.data * b.data), b.shape) if b.requires_grad else None
            )
        )

    def __rtruediv__(self, other) -> Tensor:
        return as_tensor(other) / self

    def __neg__(self) -> Tensor:
        return Tensor.from_op(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, exponent: float) -> Tensor:
        if isinstance(exponent, Tensor):
            raise ContractError('Only scalar exponents are supported.')
        x = self.data
        return Tensor.from_op(
            x ** exponent, (self,),
            lambda g: (g * exponent * x ** (exponent - 1),)
        )

    def __matmul__(self, other) -> Tensor:
        from .ops import matmul
        return matmul(self, other)

    # --- reductions and shape ---
    def sum(self, axis: Axis = None, keepdims: bool = False) -> Tensor:
        shape = self.shape

        def backward(g: np.ndarray):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape),)

        return Tensor.from_op(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)

    def mean(self, axis: Axis = None, keepdims: bool = False) -> Tensor:
        if axis is None:
            count = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        return Tensor.from_op(self.data.reshape(shape), (self,), lambda g: (g.reshape(original),))

    def transpose(self, *axes) -> Tensor:
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        return Tensor.from_op(self.data.transpose(axes), (self,), lambda g: (g.transpose(inverse),))

    def swapaxes(self, axis1: int, axis2: int) -> Tensor:
        axes = list(range(self.ndim))
        axes[axis1], axes[axis2] = axes[axis2], axes[axis1]
        return self.transpose(axes)


def as_tensor(value: t.Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)
