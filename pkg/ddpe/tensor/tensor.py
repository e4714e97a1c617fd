# Copyright 2024 The ddpe Contributors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
from __future__ import annotations

import itertools
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import (
    Any,
    Callable,
    Dict,
    Iterator,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np


class DimensionError(ValueError):
    """
    Raised when the shapes of operands do not fit an operation.
    """

    pass


class NumericError(ArithmeticError):
    """
    Raised when an operation produces NaN or infinite values.
    """

    pass


class ContractError(ValueError):
    """
    Raised when an API is used outside of its contract, e.g. calling
    :meth:`Tensor.backward` on a non-scalar tensor.
    """

    pass


_default_dtype: ContextVar[Any] = ContextVar("ddpe_default_dtype", default=np.float32)
_grad_enabled: ContextVar[bool] = ContextVar("ddpe_grad_enabled", default=True)
_ids = itertools.count()


def get_default_dtype() -> np.dtype:
    """
    :returns: The floating point type new tensors are created with. ``float32``
        unless changed using :func:`default_dtype`.
    """
    return np.dtype(_default_dtype.get())


@contextmanager
def default_dtype(dtype: Any) -> Iterator[None]:
    """
    Changes the floating point type of newly created tensors (and thus of
    newly built networks) within a ``with`` block. Gradient checks use
    ``np.float64``.

    The setting is a context variable, so every thread starts out with
    ``float32``.
    """
    token = _default_dtype.set(np.dtype(dtype).type)
    try:
        yield
    finally:
        _default_dtype.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """
    Within this block, operations do not record a graph.
    """
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor(object):
    """
    An n-dimensional array of reals participating in a reverse-mode
    differentiation graph.

    :param data: Anything ``numpy.asarray`` accepts.
    :param requires_grad: Whether gradients should be computed for this
        tensor. Tensors created directly with ``requires_grad=True`` are
        leaves, i.e. parameters.
    :param dtype: The floating point type. Defaults to
        :func:`get_default_dtype`.
    :param name: An optional name, used by checkpoints and error messages.
    """

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        *,
        dtype: Any = None,
        name: Optional[str] = None,
    ) -> None:
        self.data: np.ndarray = np.array(data, dtype=dtype or get_default_dtype())
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.id = next(_ids)
        self.op = "leaf"
        self.parents: Tuple[Tensor, ...] = ()
        self.backward_fn: Optional[BackwardFn] = None
        self.retains_grad = False

    @classmethod
    def from_op(
        Self,
        data: np.ndarray,
        parents: Sequence[Tensor],
        op: str,
        backward_fn: BackwardFn,
    ) -> Tensor:
        """
        Creates the result of an operation and, if any parent requires a
        gradient, records it in the graph.

        :param data: The forward result.
        :param parents: The operands.
        :param op: The kind of operation.
        :param backward_fn: Maps the gradient of the result to one gradient
            (or ``None``) per parent, in order. Any activations it needs must
            be captured by the closure.
        """
        if not np.all(np.isfinite(data)):
            raise NumericError(f"Operation '{op}' produced non-finite values.")
        result = Self.__new__(Self)
        result.data = data
        result.grad = None
        result.name = None
        result.id = next(_ids)
        result.op = op
        result.retains_grad = False
        result.requires_grad = is_grad_enabled() and any(
            parent.requires_grad for parent in parents
        )
        if result.requires_grad:
            result.parents = tuple(parents)
            result.backward_fn = backward_fn
        else:
            result.parents = ()
            result.backward_fn = None
        return result

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return len(self.parents) == 0

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(
                f"Only single-element tensors can be converted to a scalar: {self.shape}"
            )
        return self.data.item()

    def detach(self) -> Tensor:
        return Tensor(self.data, dtype=self.data.dtype)

    def retain_grad(self) -> Tensor:
        """
        Also populate ``grad`` for this non-leaf tensor during backward.
        """
        self.retains_grad = True
        return self

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """
        Computes the gradient of this scalar with respect to every leaf tensor
        that requires one. Gradients accumulate by summation into ``grad``.
        """
        if self.data.size != 1:
            raise ContractError(
                f"backward() can only be called on scalar tensors, got shape {self.shape}"
            )
        if not self.requires_grad:
            raise ContractError(
                "backward() called on a tensor that does not depend on any parameter"
            )
        graph = Graph.trace(self)
        grads: Dict[int, np.ndarray] = {self.id: np.ones_like(self.data)}
        for node in reversed(graph.nodes):
            tensor = node.tensor
            grad = grads.pop(tensor.id, None)
            if grad is None:
                continue
            if tensor.is_leaf or tensor.retains_grad:
                if tensor.grad is None:
                    tensor.grad = np.zeros_like(tensor.data)
                tensor.grad += grad
            if tensor.backward_fn is None:
                continue
            parent_grads = tensor.backward_fn(grad)
            for parent, parent_grad in zip(tensor.parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if parent_grad.shape != parent.data.shape:
                    raise DimensionError(
                        f"Gradient of '{tensor.op}' has shape {parent_grad.shape} for an operand of shape {parent.shape}"
                    )
                if parent.id in grads:
                    grads[parent.id] = grads[parent.id] + parent_grad
                else:
                    grads[parent.id] = parent_grad

    def __repr__(self) -> str:
        name = f", name={self.name!r}" if self.name is not None else ""
        return f"Tensor(shape={self.shape}, op={self.op!r}{name})"

    # Arithmetic
    def __add__(self, other: Union[Tensor, float]) -> Tensor:
        return add(self, other)

    def __radd__(self, other: Union[Tensor, float]) -> Tensor:
        return add(other, self)

    def __sub__(self, other: Union[Tensor, float]) -> Tensor:
        return add(self, mul(other, -1.0))

    def __rsub__(self, other: Union[Tensor, float]) -> Tensor:
        return add(other, mul(self, -1.0))

    def __neg__(self) -> Tensor:
        return mul(self, -1.0)

    def __mul__(self, other: Union[Tensor, float]) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: Union[Tensor, float]) -> Tensor:
        return mul(other, self)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def reshape(self, *shape: int) -> Tensor:
        return reshape(self, shape)

    def sum(self) -> Tensor:
        return total(self)


@dataclass
class Node:
    """
    One record of a :class:`Graph`.

    :param tensor: The tensor produced; its ``backward_fn`` closure holds the
        saved activations.
    :param op: The kind of operation.
    :param inputs: The ids of the operand tensors.
    """

    tensor: Tensor
    op: str
    inputs: Tuple[int, ...]


@dataclass
class Graph:
    """
    The topologically ordered records reachable from a root tensor. Every
    node appears exactly once and after all of its inputs.
    """

    nodes: List[Node]

    @classmethod
    def trace(Self, root: Tensor) -> Graph:
        ordered: List[Node] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while len(stack):
            tensor, expanded = stack.pop()
            if expanded:
                ordered.append(
                    Node(
                        tensor,
                        tensor.op,
                        tuple(parent.id for parent in tensor.parents),
                    )
                )
                continue
            if tensor.id in visited:
                continue
            visited.add(tensor.id)
            stack.append((tensor, True))
            for parent in reversed(tensor.parents):
                if parent.id not in visited:
                    stack.append((parent, False))
        return Self(ordered)


def as_tensor(value: Union[Tensor, float, np.ndarray], like: Optional[Tensor] = None):
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(value, dtype=dtype)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Union[Tensor, float], b: Union[Tensor, float]) -> Tensor:
    if not isinstance(a, Tensor):
        a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    if not isinstance(b, Tensor):
        b = as_tensor(b, like=a)
    try:
        data = a.data + b.data
    except ValueError as e:
        raise DimensionError(f"Cannot add shapes {a.shape} and {b.shape}: {e}")
    a_shape, b_shape = a.shape, b.shape

    def backward(g: np.ndarray):
        return (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape))

    return Tensor.from_op(data, (a, b), "add", backward)


def mul(a: Union[Tensor, float], b: Union[Tensor, float]) -> Tensor:
    if not isinstance(a, Tensor):
        a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    if not isinstance(b, Tensor):
        b = as_tensor(b, like=a)
    try:
        data = a.data * b.data
    except ValueError as e:
        raise DimensionError(f"Cannot multiply shapes {a.shape} and {b.shape}: {e}")
    a_data, b_data = a.data, b.data

    def backward(g: np.ndarray):
        return (
            _unbroadcast(g * b_data, a_data.shape) if a.requires_grad else None,
            _unbroadcast(g * a_data, b_data.shape) if b.requires_grad else None,
        )

    return Tensor.from_op(data, (a, b), "mul", backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"Cannot matrix-multiply shapes {a.shape} and {b.shape}")
    a_data, b_data = a.data, b.data

    def backward(g: np.ndarray):
        return (g @ b_data.T, a_data.T @ g)

    return Tensor.from_op(a_data @ b_data, (a, b), "matmul", backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape
    try:
        data = x.data.reshape(tuple(shape))
    except ValueError as e:
        raise DimensionError(str(e))

    def backward(g: np.ndarray):
        return (g.reshape(original),)

    return Tensor.from_op(data, (x,), "reshape", backward)


def total(x: Tensor) -> Tensor:
    shape = x.shape

    def backward(g: np.ndarray):
        return (np.broadcast_to(g, shape).copy(),)

    return Tensor.from_op(x.data.sum(keepdims=False), (x,), "sum", backward)
