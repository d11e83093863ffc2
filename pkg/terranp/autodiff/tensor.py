"""
Dense f64 tensors with define-by-run reverse-mode differentiation.

Every differentiable computation in terranp goes through :func:`apply_primitive`.
When a :class:`Tape` is active (``with Tape() as tape:``) and any input requires
gradients, the primitive is appended to the tape; :meth:`Tape.backward` then
walks the nodes in reverse insertion order. Without an active tape nothing is
recorded, which is how inference runs.
"""
import contextvars
import logging
from typing import (
    Any,
    Callable,
    Dict,
    List,
    Optional,
    Sequence,
    Tuple,
    Type,
    Union,
)

import numpy as np
from scipy import sparse

from terranp.core.exceptions import (
    DetachedGraphError,
    NonFiniteError,
    ShapeError,
    UnknownOpError,
)

logger = logging.getLogger(__name__)

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[Any]]
Grad = Optional[np.ndarray]

_ACTIVE_TAPE: "contextvars.ContextVar[Optional[Tape]]" = contextvars.ContextVar(
    "terranp_active_tape", default=None
)

CONV_DILATIONS = (1, 2, 4)


class Tensor(object):
    """
    Dense n-dimensional array of 64-bit reals.

    Arguments:
        data: anything :func:`numpy.asarray` understands
        requires_grad: whether gradients w.r.t. this tensor are wanted

    Attributes:
        data (np.ndarray): row-major f64 payload
        requires_grad (bool): gradient tracking flag
        node_id (int): index of the node that produced this tensor on its tape
    """

    __slots__ = ("data", "requires_grad", "node_id", "_tape")

    def __init__(self, data: ArrayLike, requires_grad: bool = False) -> None:
        if isinstance(data, Tensor):
            data = data.data
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("tensor data contains NaN or Inf")
        self.data = arr
        self.requires_grad = requires_grad
        self.node_id: Optional[int] = None
        self._tape: Optional["Tape"] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{grad})"

    def __add__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("add", self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("add", other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("sub", self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("sub", other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("mul", self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("mul", other, self)

    def __neg__(self) -> "Tensor":
        return apply_primitive("mul", self, -1.0)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return apply_primitive("matmul", self, other)

    def relu(self) -> "Tensor":
        return apply_primitive("relu", self)

    def tanh(self) -> "Tensor":
        return apply_primitive("tanh", self)

    def softplus(self) -> "Tensor":
        return apply_primitive("softplus", self)

    def exp(self) -> "Tensor":
        return apply_primitive("exp", self)

    def log(self) -> "Tensor":
        return apply_primitive("log", self)

    def softmax(self, axis: int = -1) -> "Tensor":
        return apply_primitive("softmax", self, axis=axis)

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return apply_primitive("sum", self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return apply_primitive("mean", self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        return apply_primitive("reshape", self, shape=shape)

    def transpose(self, *axes: int) -> "Tensor":
        return apply_primitive("transpose", self, axes=axes or None)

    def gather(self, index: np.ndarray) -> "Tensor":
        return apply_primitive("gather", self, index=index)


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class Node(object):
    """One recorded primitive: its kind, the node ids of its inputs and the
    primitive instance holding the saved activations."""

    __slots__ = ("node_id", "kind", "inputs", "function")

    def __init__(
        self,
        node_id: int,
        kind: str,
        inputs: Tuple[Optional[int], ...],
        function: Optional["Primitive"],
    ) -> None:
        self.node_id = node_id
        self.kind = kind
        self.inputs = inputs
        self.function = function

    def __repr__(self) -> str:
        return f"Node({self.node_id}, {self.kind!r}, inputs={self.inputs})"


class Tape(object):
    """
    Append-only record of the primitives run while the tape is active. A new
    tape is built for every forward pass.
    """

    def __init__(self) -> None:
        self.nodes: List[Node] = []
        self._leaves: Dict[int, Tuple[int, Tensor]] = {}
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc: Any) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def _append(self, kind: str, inputs: Tuple[Optional[int], ...], fn: Any) -> int:
        node_id = len(self.nodes)
        self.nodes.append(Node(node_id, kind, inputs, fn))
        return node_id

    def leaf(self, tensor: Tensor) -> int:
        entry = self._leaves.get(id(tensor))
        if entry is not None and entry[1] is tensor:
            return entry[0]
        node_id = self._append("leaf", (), None)
        self._leaves[id(tensor)] = (node_id, tensor)
        tensor.node_id = node_id
        tensor._tape = self
        return node_id

    def _input_id(self, tensor: Tensor) -> Optional[int]:
        if not tensor.requires_grad:
            return None
        if tensor._tape is self and tensor.node_id is not None:
            return tensor.node_id
        return self.leaf(tensor)

    def record(self, kind: str, fn: "Primitive", inputs: Sequence[Tensor], out: Tensor) -> int:
        ids = tuple(self._input_id(t) for t in inputs)
        node_id = self._append(kind, ids, fn)
        out.node_id = node_id
        out._tape = self
        return node_id

    def owns(self, tensor: Tensor) -> bool:
        return tensor._tape is self and tensor.node_id is not None

    def backward(self, loss: Tensor) -> Dict[int, np.ndarray]:
        """
        Reverse sweep from ``loss``.

        Returns:
            gradient of ``loss`` for every node it depends on, keyed by node id

        Raises:
            :obj:`terranp.core.exceptions.ShapeError`: ``loss`` isn't a scalar
            :obj:`terranp.core.exceptions.DetachedGraphError`: ``loss`` wasn't
              recorded on this tape
        """
        if loss.size != 1:
            raise ShapeError(f"loss must be a scalar, got shape {loss.shape}")
        if not self.owns(loss):
            raise DetachedGraphError("loss was not recorded on this tape")
        assert loss.node_id is not None

        grads: Dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
        for node in reversed(self.nodes[: loss.node_id + 1]):
            g = grads.get(node.node_id)
            if g is None or node.function is None:
                continue
            for input_id, input_grad in zip(node.inputs, node.function.backward(g)):
                if input_id is None or input_grad is None:
                    continue
                prev = grads.get(input_id)
                grads[input_id] = input_grad if prev is None else prev + input_grad
        return grads

    def grad(self, grads: Dict[int, np.ndarray], tensor: Tensor) -> np.ndarray:
        """Gradient of ``tensor`` out of :meth:`backward`'s result, zeros if unreached."""
        entry = self._leaves.get(id(tensor))
        node_id = entry[0] if entry is not None and entry[1] is tensor else None
        if node_id is None and self.owns(tensor):
            node_id = tensor.node_id
        if node_id is None or node_id not in grads:
            return np.zeros_like(tensor.data)
        return grads[node_id]


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPE.get()


def backward(tape: Tape, loss: Tensor) -> Dict[int, np.ndarray]:
    return tape.backward(loss)


class Primitive(object):
    """
    Base class of the differentiable primitives. ``forward`` gets the input
    arrays and saves whatever ``backward`` needs; ``backward`` gets the gradient
    w.r.t. the output and returns one gradient (or ``None``) per input.
    """

    kind = ""

    def __init__(self, **params: Any) -> None:
        self.params = params

    def forward(self, *args: np.ndarray) -> np.ndarray:
        raise NotImplementedError("needs to be implemented by the primitive")

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        raise NotImplementedError("needs to be implemented by the primitive")


PRIMITIVES: Dict[str, Type[Primitive]] = {}


def primitive(kind: str) -> Callable[[Type[Primitive]], Type[Primitive]]:
    def register(cls: Type[Primitive]) -> Type[Primitive]:
        cls.kind = kind
        PRIMITIVES[kind] = cls
        return cls

    return register


def apply_primitive(kind: str, *inputs: ArrayLike, **params: Any) -> Tensor:
    """
    Runs primitive ``kind`` and records it on the active tape when any input
    requires gradients.

    Raises:
        :obj:`terranp.core.exceptions.UnknownOpError`: no such primitive
        :obj:`terranp.core.exceptions.ShapeError`: input shapes don't conform
        :obj:`terranp.core.exceptions.NonFiniteError`: the output has NaN/Inf
    """
    try:
        cls = PRIMITIVES[kind]
    except KeyError:
        raise UnknownOpError(f"unknown primitive {kind!r}") from None
    tensors = [as_tensor(x) for x in inputs]
    fn = cls(**params)
    with np.errstate(all="ignore"):
        out = fn.forward(*(t.data for t in tensors))
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"{kind} produced non-finite values")
    result = Tensor.__new__(Tensor)
    result.data = out
    result.requires_grad = False
    result.node_id = None
    result._tape = None
    tape = _ACTIVE_TAPE.get()
    if tape is not None and any(t.requires_grad for t in tensors):
        result.requires_grad = True
        tape.record(kind, fn, tensors, result)
    return result


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sums ``grad`` back down to ``shape`` after right-aligned broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: np.ndarray, b: np.ndarray, kind: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: shapes {a.shape} and {b.shape} don't broadcast") from None


@primitive("add")
class Add(Primitive):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _broadcast_shape(a, b, self.kind)
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        return unbroadcast(grad, self.shapes[0]), unbroadcast(grad, self.shapes[1])


@primitive("sub")
class Sub(Primitive):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _broadcast_shape(a, b, self.kind)
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        return unbroadcast(grad, self.shapes[0]), unbroadcast(-grad, self.shapes[1])


@primitive("mul")
class Mul(Primitive):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _broadcast_shape(a, b, self.kind)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        return (
            unbroadcast(grad * self.b, self.a.shape),
            unbroadcast(grad * self.a, self.b.shape),
        )


@primitive("matmul")
class Matmul(Primitive):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} don't conform")
        try:
            np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
        except ValueError:
            raise ShapeError(f"matmul: batch shapes {a.shape} and {b.shape} differ") from None
        self.a, self.b = a, b
        return np.matmul(a, b)

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        ga = np.matmul(grad, np.swapaxes(self.b, -1, -2))
        gb = np.matmul(np.swapaxes(self.a, -1, -2), grad)
        return unbroadcast(ga, self.a.shape), unbroadcast(gb, self.b.shape)


@primitive("relu")
class Relu(Primitive):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.mask = x > 0
        return np.where(self.mask, x, 0.0)

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        return (grad * self.mask,)


@primitive("tanh")
class Tanh(Primitive):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.y = np.tanh(x)
        return self.y

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        return (grad * (1.0 - self.y * self.y),)


@primitive("softplus")
class Softplus(Primitive):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        return np.logaddexp(0.0, x)

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        return (grad * 0.5 * (1.0 + np.tanh(0.5 * self.x)),)


@primitive("exp")
class Exp(Primitive):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.y = np.exp(x)
        return self.y

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        return (grad * self.y,)


@primitive("log")
class Log(Primitive):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        return np.log(x)

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        return (grad / self.x,)


@primitive("softmax")
class Softmax(Primitive):
    def forward(self, x: np.ndarray) -> np.ndarray:
        axis = self.params.get("axis", -1)
        e = np.exp(x - np.max(x, axis=axis, keepdims=True))
        self.y = e / np.sum(e, axis=axis, keepdims=True)
        return self.y

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        axis = self.params.get("axis", -1)
        inner = np.sum(grad * self.y, axis=axis, keepdims=True)
        return (self.y * (grad - inner),)


def _expand_reduced(
    grad: np.ndarray, shape: Tuple[int, ...], axis: Optional[int], keepdims: bool
) -> np.ndarray:
    if axis is not None and not keepdims:
        grad = np.expand_dims(grad, axis)
    return np.broadcast_to(grad, shape).copy()


@primitive("sum")
class Sum(Primitive):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.shape = x.shape
        return np.asarray(
            np.sum(x, axis=self.params.get("axis"), keepdims=self.params.get("keepdims", False))
        )

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        axis, keepdims = self.params.get("axis"), self.params.get("keepdims", False)
        return (_expand_reduced(grad, self.shape, axis, keepdims),)


@primitive("mean")
class Mean(Primitive):
    def forward(self, x: np.ndarray) -> np.ndarray:
        axis = self.params.get("axis")
        if x.size == 0 or (axis is not None and x.shape[axis] == 0):
            raise ShapeError("mean over an empty axis")
        self.shape = x.shape
        self.count = x.size if axis is None else x.shape[axis]
        return np.asarray(np.mean(x, axis=axis, keepdims=self.params.get("keepdims", False)))

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        axis, keepdims = self.params.get("axis"), self.params.get("keepdims", False)
        return (_expand_reduced(grad, self.shape, axis, keepdims) / self.count,)


@primitive("concat")
class Concat(Primitive):
    def forward(self, *xs: np.ndarray) -> np.ndarray:
        axis = self.params.get("axis", -1)
        try:
            out = np.concatenate(xs, axis=axis)
        except ValueError as e:
            raise ShapeError(f"concat: {e}") from None
        self.sizes = [x.shape[axis] for x in xs]
        return out

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        axis = self.params.get("axis", -1)
        splits = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, splits, axis=axis))


@primitive("gather")
class Gather(Primitive):
    def forward(self, x: np.ndarray) -> np.ndarray:
        index = np.asarray(self.params["index"])
        if not np.issubdtype(index.dtype, np.integer):
            raise ShapeError("gather: index must be integral")
        if x.ndim < 1 or (index.size and (index.min() < 0 or index.max() >= x.shape[0])):
            raise ShapeError(f"gather: index out of range for {x.shape[0]} rows")
        self.index = index
        self.shape = x.shape
        return x[index]

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        n = self.shape[0]
        flat = self.index.reshape(-1)
        rows = grad.reshape((flat.size,) + self.shape[1:]).reshape(flat.size, -1)
        # scatter-add as a sparse (n, len(index)) product
        scatter = sparse.csr_matrix(
            (np.ones(flat.size), (flat, np.arange(flat.size))), shape=(n, flat.size)
        )
        return (np.asarray(scatter @ rows).reshape(self.shape),)


@primitive("reshape")
class Reshape(Primitive):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.shape = x.shape
        try:
            return x.reshape(self.params["shape"])
        except ValueError as e:
            raise ShapeError(f"reshape: {e}") from None

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        return (grad.reshape(self.shape),)


@primitive("transpose")
class Transpose(Primitive):
    def forward(self, x: np.ndarray) -> np.ndarray:
        axes = self.params.get("axes")
        self.axes = tuple(axes) if axes is not None else tuple(reversed(range(x.ndim)))
        if sorted(self.axes) != list(range(x.ndim)):
            raise ShapeError(f"transpose: bad axes {self.axes} for {x.ndim} dims")
        return np.ascontiguousarray(np.transpose(x, self.axes))

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        return (np.transpose(grad, np.argsort(self.axes)),)


@primitive("conv2d")
class Conv2d(Primitive):
    """
    Zero-padded ``same`` convolution of a (C_in, H, W) image with a
    (C_out, C_in, k, k) kernel, k odd. Only stride 1 and dilations 1, 2 and 4.
    """

    def forward(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        stride = self.params.get("stride", 1)
        d = self.params.get("dilation", 1)
        if stride != 1 or d not in CONV_DILATIONS:
            raise ShapeError(f"conv2d: unsupported stride {stride} / dilation {d}")
        if x.ndim != 3 or w.ndim != 4 or w.shape[1] != x.shape[0]:
            raise ShapeError(f"conv2d: image {x.shape} and kernel {w.shape} don't conform")
        k = w.shape[2]
        if k != w.shape[3] or k % 2 == 0:
            raise ShapeError("conv2d: kernel must be square with odd size")
        c, h, wd = x.shape
        pad = d * (k - 1) // 2
        xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
        cols = np.empty((c, k, k, h, wd))
        for i in range(k):
            for j in range(k):
                cols[:, i, j] = xp[:, i * d : i * d + h, j * d : j * d + wd]
        self.cols, self.w, self.pad, self.d = cols, w, pad, d
        self.x_shape = x.shape
        return np.tensordot(w, cols, axes=([1, 2, 3], [0, 1, 2]))

    def backward(self, grad: np.ndarray) -> Tuple[Grad, ...]:
        gw = np.tensordot(grad, self.cols, axes=([1, 2], [3, 4]))
        gcols = np.tensordot(self.w, grad, axes=([0], [0]))
        c, h, wd = self.x_shape
        k, d, pad = self.w.shape[2], self.d, self.pad
        gxp = np.zeros((c, h + 2 * pad, wd + 2 * pad))
        for i in range(k):
            for j in range(k):
                gxp[:, i * d : i * d + h, j * d : j * d + wd] += gcols[:, i, j]
        return gxp[:, pad : pad + h, pad : pad + wd], gw


def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    return apply_primitive("concat", *tensors, axis=axis)


def conv2d(x: ArrayLike, w: ArrayLike, dilation: int = 1, stride: int = 1) -> Tensor:
    return apply_primitive("conv2d", x, w, dilation=dilation, stride=stride)


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    return apply_primitive("matmul", a, b)
