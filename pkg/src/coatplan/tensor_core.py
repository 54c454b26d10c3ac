"""Dense tensors with reverse-mode automatic differentiation and Adam.

The array payload is a numpy ndarray (float32 for training, float64 for
verification-grade gradient checks); the operation graph, backward pass and
the optimizer are implemented here. Graph nodes are the tensors themselves:
each operation records its parents and a vector-Jacobian product closure, and
``backward`` replays those closures in reverse topological order. Gradients
are accumulated in a per-call table rather than on the tensors, so concurrent
backward passes over a shared read-only ParamStore are safe.
"""

from __future__ import annotations

import threading
from collections.abc import Iterable

import numpy as np

from .errors import ConfigError, ContractError, ShapeError

EPS_LOG = 1e-9  # inside cross-entropy log
HE_UNIFORM_GAIN = 6.0  # limit = sqrt(gain / fan_in)

_state = threading.local()


def _grad_enabled():
    return getattr(_state, "grad_enabled", True)


class no_grad:
    """Context manager disabling graph construction (inference fast path)."""

    def __enter__(self):
        self._prev = _grad_enabled()
        _state.grad_enabled = False
        return self

    def __exit__(self, *exc):
        _state.grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, grad={self.requires_grad})"

    # Light operator sugar; the named functions below are the real surface.
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.dtype))

    def __mul__(self, other):
        return mul(self, _as_tensor(other, self.dtype))

    def __neg__(self):
        return neg(self)


def _as_tensor(x, dtype=None):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=dtype))


def _node(data, parents, vjp):
    """Create an op output, recording the graph only when it can matter."""
    need = _grad_enabled() and any(p.requires_grad for p in parents)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = need
    out._parents = parents if need else ()
    out._vjp = vjp if need else None
    return out


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise / shape primitives
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(data, (a, b), vjp)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(data, (a, b), vjp)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _node(data, (a, b), vjp)


def neg(a):
    return _node(-a.data, (a,), lambda g: (-g,))


def scale(a, c):
    """Multiply by a python scalar constant."""
    c = float(c)
    return _node(a.data * c, (a,), lambda g: (g * c,))


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    return _node(data, (a, b), vjp)


def transpose2d(a):
    if a.data.ndim != 2:
        raise ShapeError(f"transpose2d expects a matrix, got {a.shape}")
    return _node(np.ascontiguousarray(a.data.T), (a,), lambda g: (g.T,))


def reshape(a, shape):
    old = a.shape
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(parts, axis=-1):
    parts = [_as_tensor(p) for p in parts]
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(data, tuple(parts), vjp)


def slice_lastdim(a, start, stop):
    data = a.data[..., start:stop]
    shape = a.shape

    def vjp(g):
        out = np.zeros(shape, dtype=g.dtype)
        out[..., start:stop] = g
        return (out,)

    return _node(np.ascontiguousarray(data), (a,), vjp)


def gather_position(a, pos):
    """Hidden vector at grid cell (row, col) of an h*w*c tensor."""
    if a.data.ndim != 3:
        raise ShapeError(f"gather_position expects h*w*c, got {a.shape}")
    r, c = pos
    h, w, _ = a.shape
    if not (0 <= r < h and 0 <= c < w):
        raise ContractError(f"position {pos} outside {h}x{w} grid")
    data = a.data[r, c, :].copy()
    shape = a.shape

    def vjp(g):
        out = np.zeros(shape, dtype=g.dtype)
        out[r, c, :] = g
        return (out,)

    return _node(data, (a,), vjp)


# ---------------------------------------------------------------------------
# nonlinearities and reductions
# ---------------------------------------------------------------------------

def relu(a):
    data = np.maximum(a.data, 0.0)

    def vjp(g):
        return (g * (a.data > 0),)

    return _node(data, (a,), vjp)


def softmax(a, axis=-1):
    """Probability-normalized exponentials, max-subtracted for stability."""
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * s).sum(axis=axis, keepdims=True)
        return (s * (g - inner),)

    return _node(s, (a,), vjp)


def log(a):
    data = np.log(a.data)

    def vjp(g):
        return (g / a.data,)

    return _node(data, (a,), vjp)


def absolute(a):
    data = np.abs(a.data)

    def vjp(g):
        return (g * np.sign(a.data),)

    return _node(data, (a,), vjp)


def tsum(a):
    shape = a.shape

    def vjp(g):
        return (np.full(shape, g, dtype=a.dtype),)

    return _node(np.asarray(a.data.sum(), dtype=a.dtype), (a,), vjp)


def tmean(a):
    n = a.data.size
    shape = a.shape

    def vjp(g):
        return (np.full(shape, g / n, dtype=a.dtype),)

    return _node(np.asarray(a.data.mean(), dtype=a.dtype), (a,), vjp)


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------

def conv2d_same(x, kernels, bias):
    """3x3 cross-correlation with one-cell zero padding; spatial dims preserved.

    x: h*w*c_in, kernels: 3*3*c_in*c_out, bias: c_out.
    """
    if x.data.ndim != 3:
        raise ShapeError(f"conv input must be h*w*c, got {x.shape}")
    if kernels.data.ndim != 4 or kernels.shape[0] != 3 or kernels.shape[1] != 3:
        raise ShapeError(f"kernels must be 3*3*c_in*c_out, got {kernels.shape}")
    h, w, cin = x.shape
    if kernels.shape[2] != cin:
        raise ShapeError(f"kernel input channels {kernels.shape[2]} != input channels {cin}")
    cout = kernels.shape[3]
    if bias.shape != (cout,):
        raise ShapeError(f"bias shape {bias.shape} != ({cout},)")

    padded = np.zeros((h + 2, w + 2, cin), dtype=x.dtype)
    padded[1:h + 1, 1:w + 1, :] = x.data
    cols = np.empty((h * w, 9 * cin), dtype=x.dtype)
    for k in range(9):
        di, dj = divmod(k, 3)
        cols[:, k * cin:(k + 1) * cin] = padded[di:di + h, dj:dj + w, :].reshape(h * w, cin)
    wmat = kernels.data.reshape(9 * cin, cout)
    out = (cols @ wmat + bias.data).reshape(h, w, cout)

    def vjp(g):
        g2 = g.reshape(h * w, cout)
        dk = (cols.T @ g2).reshape(3, 3, cin, cout)
        db = g2.sum(axis=0)
        dcols = g2 @ wmat.T
        dpad = np.zeros((h + 2, w + 2, cin), dtype=g.dtype)
        for k in range(9):
            di, dj = divmod(k, 3)
            dpad[di:di + h, dj:dj + w, :] += dcols[:, k * cin:(k + 1) * cin].reshape(h, w, cin)
        return dpad[1:h + 1, 1:w + 1, :], dk, db

    return _node(out, (x, kernels, bias), vjp)


_ACTIVATIONS = ("relu", "identity", "softmax")


def dense(x, weights, bias, activation="identity"):
    """Affine map on a flat vector followed by a named activation."""
    if activation not in _ACTIVATIONS:
        raise ConfigError(f"unknown activation {activation!r}; expected one of {_ACTIVATIONS}")
    if x.data.ndim != 1:
        raise ShapeError(f"dense input must be a vector, got {x.shape}")
    if weights.data.ndim != 2 or weights.shape[0] != x.shape[0]:
        raise ShapeError(f"weights {weights.shape} incompatible with input {x.shape}")
    if bias.shape != (weights.shape[1],):
        raise ShapeError(f"bias {bias.shape} incompatible with weights {weights.shape}")
    n = x.shape[0]
    affine = add(reshape(matmul(reshape(x, (1, n)), weights), (weights.shape[1],)), bias)
    if activation == "relu":
        return relu(affine)
    if activation == "softmax":
        return softmax(affine, axis=-1)
    return affine


# ---------------------------------------------------------------------------
# parameters, backward pass, optimizer, losses
# ---------------------------------------------------------------------------

class ParamStore:
    """Ordered name -> Tensor map with per-parameter trainable flags."""

    def __init__(self):
        self._params = {}
        self._trainable = {}

    def add(self, name, tensor, trainable=True):
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        tensor.requires_grad = bool(trainable)
        self._params[name] = tensor
        self._trainable[name] = bool(trainable)

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def is_trainable(self, name):
        return self._trainable[name]

    def trainable_items(self):
        return [(n, t) for n, t in self._params.items() if self._trainable[n]]

    def copy(self):
        dup = ParamStore()
        for name, t in self._params.items():
            dup.add(name, Tensor(t.data.copy()), trainable=self._trainable[name])
        return dup

    def total_size(self):
        return sum(t.size for t in self._params.values())


def backward(loss, params):
    """Gradients of a scalar loss w.r.t. every trainable parameter.

    Parameters not reached by the graph get zero gradients (disconnected is
    legal); non-trainable parameters are absent from the result.
    """
    if loss.data.size != 1:
        raise ContractError(f"loss must be scalar, got shape {loss.shape}")

    # Iterative topological order over the recorded graph.
    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    grads = {id(loss): np.ones((), dtype=loss.dtype).reshape(loss.shape)}
    for node in reversed(order):
        if node._vjp is None:
            continue  # leaf: keep its accumulated gradient for collection below
        g = grads.pop(id(node), None)
        if g is None:
            continue
        parent_grads = node._vjp(g)
        for parent, pg in zip(node._parents, parent_grads):
            if not parent.requires_grad or pg is None:
                continue
            acc = grads.get(id(parent))
            if acc is None:
                grads[id(parent)] = pg
            else:
                grads[id(parent)] = acc + pg

    out = {}
    for name, tensor in params.trainable_items():
        g = grads.get(id(tensor))
        out[name] = np.zeros_like(tensor.data) if g is None else g
    return out


class AdamState:
    """First/second moment estimates plus step counter for one ParamStore."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {n: np.zeros_like(t.data) for n, t in params.trainable_items()}
        self.v = {n: np.zeros_like(t.data) for n, t in params.trainable_items()}


def adam_step(params, grads, state, lr):
    """One bias-corrected Adam update, in place on params and state."""
    if lr <= 0:
        raise ContractError(f"learning rate must be positive, got {lr}")
    state.t += 1
    b1, b2, eps, t = state.beta1, state.beta2, state.eps, state.t
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, tensor in params.trainable_items():
        if name not in grads:
            raise ContractError(f"missing gradient for trainable parameter {name!r}")
        g = grads[name]
        if g.shape != tensor.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {tensor.data.shape} for {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        tensor.data -= (lr / c1) * m / (np.sqrt(v / c2) + eps)


def loss_eval(kind, prediction, target):
    """Scalar training loss: 'mae' or 'categorical_cross_entropy'."""
    target = _as_tensor(target, dtype=prediction.dtype)
    if prediction.shape != target.shape:
        raise ShapeError(f"prediction {prediction.shape} vs target {target.shape}")
    if kind == "mae":
        return tmean(absolute(sub(prediction, target)))
    if kind == "categorical_cross_entropy":
        shifted = add(prediction, Tensor(np.full(prediction.shape, EPS_LOG, dtype=prediction.dtype)))
        return neg(tsum(mul(target, log(shifted))))
    raise ConfigError(f"unknown loss kind {kind!r}")


def he_uniform(shape, fan_in, rng, dtype=np.float32):
    """Uniform(-limit, limit) with limit = sqrt(6 / fan_in)."""
    limit = float(np.sqrt(HE_UNIFORM_GAIN / fan_in))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def assert_finite(tensor, what="tensor"):
    if not np.all(np.isfinite(tensor.data)):
        raise ContractError(f"{what} contains non-finite entries")
    return tensor


def constant(data, dtype=None):
    """Non-trainable tensor wrapper for inputs and fixed encodings."""
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=False)


def batch_mean_grads(grad_dicts):
    """Average per-sample gradient dicts (deterministic accumulation order)."""
    if not grad_dicts:
        raise ContractError("no gradients to average")
    inv = 1.0 / len(grad_dicts)
    out = {}
    for name in grad_dicts[0]:
        acc = grad_dicts[0][name].copy()
        for d in grad_dicts[1:]:
            acc += d[name]
        acc *= inv
        out[name] = acc
    return out
