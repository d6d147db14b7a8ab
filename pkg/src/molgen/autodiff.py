"""Reverse-mode automatic differentiation over dense float64 arrays.

A dynamic tape: every operation records its parents and a vector-Jacobian
closure on the output tensor, and ``Tensor.backward()`` walks the graph in
reverse topological order. Broadcasting follows numpy semantics with
gradients summed back to the parent shapes, which covers the leading-batch
and bias patterns used by the model without a general broadcasting engine.

Only the primitives needed by the denoiser are implemented; each one is
exercised against central finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "add", "sub", "neg", "mul", "div", "matmul",
    "reshape", "transpose", "broadcast_to", "concat",
    "sum_reduce", "mean_reduce",
    "sqrt", "clamp_min", "exp", "log",
    "sigmoid", "silu", "softmax", "log_softmax",
    "layer_norm", "vector_norm", "cross_product",
    "linear", "swiglu",
    "numeric_gradient",
]


class Tensor:
    """Dense array node of the differentiation tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable parent."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        if not self.requires_grad:
            raise ValueError("backward() on a tensor with no gradient path")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._vjp is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._vjp(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                g = np.asarray(g, dtype=np.float64)
                parent.grad = g if parent.grad is None else parent.grad + g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def _t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = parents
        out._vjp = vjp
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def sub(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))


def neg(a) -> Tensor:
    a = _t(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.data.shape),
                            _unbroadcast(g * a.data, b.data.shape)))


def div(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    return _make(a.data / b.data, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.data.shape),
                            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)))


def matmul(a, b) -> Tensor:
    a, b = _t(a), _t(b)

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return _make(np.matmul(a.data, b.data), (a, b), vjp)


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------

def reshape(a, shape) -> Tensor:
    a = _t(a)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),))


def transpose(a, axes) -> Tensor:
    a = _t(a)
    inv = np.argsort(axes)
    return _make(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def broadcast_to(a, shape) -> Tensor:
    a = _t(a)
    return _make(np.broadcast_to(a.data, shape).copy(), (a,),
                 lambda g: (_unbroadcast(g, a.data.shape),))


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_t(x) for x in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors),
                 lambda g: tuple(np.split(g, splits, axis=axis)))


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def sum_reduce(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _t(a)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), vjp)


def mean_reduce(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _t(a)
    if axis is None:
        count = a.data.size
    else:
        count = a.data.shape[axis]

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / count, a.data.shape).copy(),)

    return _make(a.data.mean(axis=axis, keepdims=keepdims), (a,), vjp)


# ---------------------------------------------------------------------------
# pointwise nonlinearities
# ---------------------------------------------------------------------------

def sqrt(a) -> Tensor:
    a = _t(a)
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g * 0.5 / out,))


def clamp_min(a, floor: float) -> Tensor:
    a = _t(a)
    mask = a.data > floor
    return _make(np.maximum(a.data, floor), (a,), lambda g: (g * mask,))


def exp(a) -> Tensor:
    a = _t(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = _t(a)
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def sigmoid(a) -> Tensor:
    a = _t(a)
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def silu(a) -> Tensor:
    a = _t(a)
    sig = 1.0 / (1.0 + np.exp(-a.data))
    return _make(a.data * sig, (a,), lambda g: (g * (sig + a.data * sig * (1.0 - sig)),))


def softmax(a) -> Tensor:
    """Softmax over the last axis."""
    a = _t(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _make(out, (a,), vjp)


def log_softmax(a) -> Tensor:
    a = _t(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - log_z
    probs = np.exp(out)

    def vjp(g):
        return (g - probs * g.sum(axis=-1, keepdims=True),)

    return _make(out, (a,), vjp)


# ---------------------------------------------------------------------------
# normalization and geometry
# ---------------------------------------------------------------------------

def layer_norm(a, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit variance."""
    a = _t(a)
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    std = np.sqrt(var + eps)
    y = (a.data - mu) / std

    def vjp(g):
        gm = g.mean(axis=-1, keepdims=True)
        gym = (g * y).mean(axis=-1, keepdims=True)
        return ((g - gm - y * gym) / std,)

    return _make(y, (a,), vjp)


def vector_norm(a, keepdims: bool = True) -> Tensor:
    """Euclidean norm over the last axis; gradient is defined as 0 at 0."""
    a = _t(a)
    n = np.sqrt((a.data * a.data).sum(axis=-1, keepdims=True))
    out = n if keepdims else n[..., 0]

    def vjp(g):
        gg = g if keepdims else g[..., None]
        safe = np.where(n > 0, n, 1.0)
        return (gg * a.data / safe * (n > 0),)

    return _make(out, (a,), vjp)


def cross_product(a, b) -> Tensor:
    """Row-wise 3-vector cross product a x b over the last axis."""
    a, b = _t(a), _t(b)
    if a.data.shape[-1] != 3 or b.data.shape[-1] != 3:
        raise ValueError("cross_product expects a trailing axis of size 3")

    def vjp(g):
        ga = np.cross(b.data, g)
        gb = np.cross(g, a.data)
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return _make(np.cross(a.data, b.data), (a, b), vjp)


# ---------------------------------------------------------------------------
# composites
# ---------------------------------------------------------------------------

def linear(x, w, b=None) -> Tensor:
    out = matmul(x, w)
    return out if b is None else add(out, b)


def swiglu(x, w1, w2, w3) -> Tensor:
    """Gated feed-forward: (silu(x W1) * (x W2)) W3."""
    return matmul(mul(silu(matmul(x, w1)), matmul(x, w2)), w3)


# ---------------------------------------------------------------------------
# finite differences (test oracle hook)
# ---------------------------------------------------------------------------

def numeric_gradient(scalar_fn, arrays: list[np.ndarray], h: float = 1e-4,
                     entries: dict[int, list[int]] | None = None) -> list[np.ndarray]:
    """Central finite differences of scalar_fn(*arrays) w.r.t. each array.

    `entries` optionally maps array position -> flat indices to probe;
    unprobed entries stay zero and arrays absent from the map are skipped
    entirely. Used to spot-check large parameter sets without a full sweep.
    """
    grads = []
    for i, base in enumerate(arrays):
        base = np.asarray(base, dtype=np.float64)
        g = np.zeros_like(base)
        if entries is None:
            flat_idx = range(base.size)
        else:
            flat_idx = entries.get(i, [])
        for k in flat_idx:
            bumped = [np.array(a, dtype=np.float64, copy=True) for a in arrays]
            bumped[i].reshape(-1)[k] += h
            hi = scalar_fn(*bumped)
            bumped[i].reshape(-1)[k] -= 2 * h
            lo = scalar_fn(*bumped)
            g.reshape(-1)[k] = (hi - lo) / (2 * h)
        grads.append(g)
    return grads
