"""Minimal dense-tensor compute with reverse-mode gradients.

Tensors wrap numpy arrays; every traced op records a backward closure and
its parents, and backward() walks the graph in reverse topological order.
Float32 is the working precision; switch the default dtype to float64 for
finite-difference gradient checking.
"""

from __future__ import annotations

import math
import threading
from contextlib import contextmanager

import numpy as np

from .errors import DegenerateBatch, NoTrace, ShapeError

_default_dtype = np.float32
_tls = threading.local()


def _grad_on() -> bool:
    return getattr(_tls, "grad_enabled", True)

GELU_COEFF = 0.044715
GELU_SCALE = math.sqrt(2.0 / math.pi)


def set_default_dtype(dtype) -> None:
    global _default_dtype
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be float32 or float64")
    _default_dtype = dtype


def get_default_dtype():
    return _default_dtype


@contextmanager
def dtype(dtype_):
    """Temporarily switch the default dtype (gradient checking)."""
    global _default_dtype
    old = _default_dtype
    set_default_dtype(dtype_)
    try:
        yield
    finally:
        _default_dtype = old


@contextmanager
def no_grad():
    """Disable trace recording on this thread (frozen-parameter inference)."""
    old = _grad_on()
    _tls.grad_enabled = False
    try:
        yield
    finally:
        _tls.grad_enabled = old


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum grad down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=_default_dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- graph walk ---------------------------------------------------------
    def backward(self) -> None:
        """Accumulate gradients of this scalar into every traced parameter,
        then clear the trace."""
        if self._backward is None and not self._parents:
            raise NoTrace("no forward trace recorded for this tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        # release the trace so memory is reclaimed and a second backward
        # raises NoTrace
        for node in topo:
            node._parents = ()
            node._backward = None
            if not node.requires_grad and node is not self:
                node.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        grad = _unbroadcast(np.asarray(grad, dtype=self.data.dtype), self.data.shape)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad = self.grad + grad

    # -- operators ----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def reshape(self, *shape):
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data, parents, backward) -> Tensor:
    traced = _grad_on() and any(
        p.requires_grad or p._parents or p._backward is not None for p in parents
    )
    if not traced:
        return Tensor(data)
    return Tensor(data, _parents=tuple(parents), _backward=backward)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(grad):
        a._accumulate(grad)
        b._accumulate(grad)

    return _make(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward(grad):
        a._accumulate(grad * b.data)
        b._accumulate(grad * a.data)

    return _make(out_data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2 or a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"cannot matmul {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def backward(grad):
        a._accumulate(grad @ np.swapaxes(b.data, -1, -2))
        b._accumulate(np.swapaxes(a.data, -1, -2) @ grad)

    return _make(out_data, (a, b), backward)


def take(a, key) -> Tensor:
    a = as_tensor(a)
    out_data = a.data[key]

    def backward(grad):
        full = np.zeros_like(a.data)
        np.add.at(full, key, grad)
        a._accumulate(full)

    return _make(out_data, (a,), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.reshape(shape)

    def backward(grad):
        a._accumulate(grad.reshape(a.data.shape))

    return _make(out_data, (a,), backward)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.swapaxes(a.data, -1, -2)

    def backward(grad):
        a._accumulate(np.swapaxes(grad, -1, -2))

    return _make(out_data, (a,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(grad):
        offset = 0
        for t, size in zip(tensors, sizes):
            index = [slice(None)] * grad.ndim
            index[axis] = slice(offset, offset + size)
            t._accumulate(grad[tuple(index)])
            offset += size

    return _make(out_data, tuple(tensors), backward)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(grad):
        if axis is None:
            a._accumulate(np.broadcast_to(grad, a.data.shape))
            return
        if not keepdims:
            grad = np.expand_dims(grad, axis)
        a._accumulate(np.broadcast_to(grad, a.data.shape))

    return _make(out_data, (a,), backward)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.sqrt(a.data)

    def backward(grad):
        a._accumulate(grad * 0.5 / np.maximum(out_data, 1e-300))

    return _make(out_data, (a,), backward)


def reciprocal(a) -> Tensor:
    a = as_tensor(a)
    out_data = 1.0 / a.data

    def backward(grad):
        a._accumulate(-grad * out_data * out_data)

    return _make(out_data, (a,), backward)


def clamp_min(a, floor: float) -> Tensor:
    a = as_tensor(a)
    out_data = np.maximum(a.data, floor)

    def backward(grad):
        a._accumulate(grad * (a.data > floor))

    return _make(out_data, (a,), backward)


def gelu(a) -> Tensor:
    """Gaussian-error linear unit, tanh approximation."""
    a = as_tensor(a)
    x = a.data
    inner = GELU_SCALE * (x + GELU_COEFF * x**3)
    tanh_inner = np.tanh(inner)
    out_data = 0.5 * x * (1.0 + tanh_inner)

    def backward(grad):
        sech2 = 1.0 - tanh_inner**2
        d_inner = GELU_SCALE * (1.0 + 3.0 * GELU_COEFF * x**2)
        a._accumulate(grad * (0.5 * (1.0 + tanh_inner) + 0.5 * x * sech2 * d_inner))

    return _make(out_data, (a,), backward)


def linear(inputs, weight, bias=None) -> Tensor:
    """Affine map on the trailing axis: [*, in] x [in, out] -> [*, out]."""
    inputs, weight = as_tensor(inputs), as_tensor(weight)
    if inputs.data.shape[-1] != weight.data.shape[0]:
        raise ShapeError(
            f"linear: input {inputs.data.shape} incompatible with weight {weight.data.shape}"
        )
    out = matmul(inputs, weight)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.data.shape[-1] != weight.data.shape[1]:
            raise ShapeError("linear: bias does not match weight output width")
        out = add(out, bias)
    return out


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Plain numpy row softmax (no trace)."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def batchnorm(
    inputs,
    gamma,
    beta,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    mode: str,
    momentum: float = 0.9,
    eps: float = 1e-5,
    update_stats: bool = True,
) -> Tensor:
    """Per-channel normalization over [cells, channels].  Train mode uses
    batch statistics (and updates the running buffers in place); eval mode
    uses the running statistics."""
    inputs = as_tensor(inputs)
    if mode == "train":
        if inputs.data.shape[0] < 2:
            raise DegenerateBatch("BatchNorm needs at least 2 cells in train mode")
        mean = tmean(inputs, axis=0, keepdims=True)
        centered = inputs - mean
        var = tmean(mul(centered, centered), axis=0, keepdims=True)
        if update_stats:
            running_mean *= momentum
            running_mean += (1.0 - momentum) * mean.data.reshape(-1)
            running_var *= momentum
            running_var += (1.0 - momentum) * var.data.reshape(-1)
        inv_std = reciprocal(sqrt(add(var, eps)))
        normalized = mul(centered, inv_std)
    elif mode == "eval":
        inv = 1.0 / np.sqrt(running_var + eps)
        normalized = mul(inputs - Tensor(running_mean), Tensor(inv))
    else:
        raise ValueError(f"unknown batchnorm mode: {mode!r}")
    return add(mul(normalized, gamma), beta)


def weighted_cross_entropy(logits, labels, weights, mask) -> Tensor:
    """Mean over valid cells of weights[label] * (-log softmax[label]).

    logits: [cells, 3]; labels: int [cells]; weights: [3]; mask: bool [cells].
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    weights = np.asarray(weights, dtype=logits.data.dtype)
    mask = np.asarray(mask, dtype=bool)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= logits.data.shape[1]:
        raise ValueError("labels out of class range")
    n_valid = int(mask.sum())
    if n_valid == 0:
        raise DegenerateBatch("every cell is masked out")

    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    log_probs = z - zmax - np.log(np.exp(z - zmax).sum(axis=1, keepdims=True))
    rows = np.arange(z.shape[0])
    per_cell = -weights[labels] * log_probs[rows, labels]
    loss_value = per_cell[mask].sum() / n_valid

    def backward(grad):
        probs = softmax_rows(z)
        onehot = np.zeros_like(z)
        onehot[rows, labels] = 1.0
        d = weights[labels][:, None] * (probs - onehot) / n_valid
        d[~mask] = 0.0
        logits._accumulate(grad * d)

    return _make(np.asarray(loss_value), (logits,), backward)


# -- parameters and optimizer ----------------------------------------------


class ParamStore:
    """Named parameter tensors with paired gradient and Adam moment buffers,
    plus non-trainable state arrays (BatchNorm running statistics)."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0
        self.state: dict[str, np.ndarray] = {}

    def add(self, name: str, data) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        tensor = Tensor(data, requires_grad=True)
        self._params[name] = tensor
        self._m[name] = np.zeros_like(tensor.data)
        self._v[name] = np.zeros_like(tensor.data)
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self) -> None:
        for tensor in self._params.values():
            tensor.grad = None

    def parameter_count(self) -> int:
        return sum(t.data.size for t in self._params.values())


def adam_step(
    store: ParamStore,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """Standard Adam update with bias correction; gradients are zeroed
    afterward.  Parameters with no gradient are left untouched."""
    beta1, beta2 = betas
    store.step_count += 1
    t = store.step_count
    for name, tensor in store.items():
        grad = tensor.grad
        if grad is None:
            continue
        m = store._m[name]
        v = store._v[name]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        tensor.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(tensor.data.dtype)
    store.zero_grad()


def glorot_init(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out))."""
    if len(shape) == 1:
        fan_in = fan_out = shape[0]
    else:
        fan_in, fan_out = shape[-2], shape[-1]
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(_default_dtype)
