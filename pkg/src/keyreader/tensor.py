"""Dense float64 tensors with reverse-mode differentiation.

Every model in the package is written against this module. A :class:`Tensor`
wraps a numpy array; operations on tensors record themselves into an implicit
graph (unless recording is disabled with :func:`no_grad`) and
:meth:`Tensor.backward` walks the graph in reverse creation order.
"""
import contextlib
import itertools
import logging
import struct
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

_ids = itertools.count()
_grad_enabled = True


class ContractViolation(ValueError):
    """Operand shapes or call preconditions do not conform."""


class NumericDomainError(ArithmeticError):
    """A value lies outside the domain of the requested function."""


class NonFiniteGradient(FloatingPointError):
    def __init__(self, name):
        super().__init__(f"non-finite gradient for parameter {name!r}")
        self.name = name


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, decoding)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled():
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "id", "name")

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if self.requires_grad else None
        self.parents = ()
        self.backward_fn = None
        self.id = next(_ids)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={list(self.shape)}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ContractViolation(f"item() on tensor of shape {list(self.shape)}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def backward(self):
        backward(self)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    @property
    def T(self):
        return transpose(self)


def constant(data):
    return Tensor(data, requires_grad=False)


def parameter(data, name=None):
    return Tensor(data, requires_grad=True, name=name)


def make_node(data, parents, backward_fn):
    """Register a new graph node.

    ``backward_fn(g)`` receives the gradient with respect to this node's value
    and returns one gradient (or None) per parent, in order.
    """
    out = Tensor.__new__(Tensor)
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    out.data = arr
    out.id = next(_ids)
    out.name = None
    needs = _grad_enabled and any(p.requires_grad for p in parents)
    out.requires_grad = needs
    if needs:
        out.grad = None
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
    else:
        out.grad = None
        out.parents = ()
        out.backward_fn = None
    return out


def _as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return constant(x)


def _same_shape(op, a, b):
    if a.shape != b.shape:
        raise ContractViolation(f"{op}: shape mismatch {list(a.shape)} vs {list(b.shape)}")


def _scalar(x):
    return not isinstance(x, Tensor) and np.ndim(x) == 0


def add(a, b):
    if _scalar(b):
        a = _as_tensor(a)
        return make_node(a.data + b, (a,), lambda g: (g,))
    if _scalar(a):
        return add(b, a)
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape("add", a, b)
    return make_node(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    if _scalar(b):
        a = _as_tensor(a)
        return make_node(a.data - b, (a,), lambda g: (g,))
    if _scalar(a):
        b = _as_tensor(b)
        return make_node(a - b.data, (b,), lambda g: (-g,))
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape("subtract", a, b)
    return make_node(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b):
    if _scalar(b):
        a = _as_tensor(a)
        c = float(b)
        return make_node(a.data * c, (a,), lambda g: (g * c,))
    if _scalar(a):
        return mul(b, a)
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape("multiply", a, b)
    ad, bd = a.data, b.data
    return make_node(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def matmul(a, b):
    """Matrix product for 1-D/2-D operands (vector-matrix, matrix-vector, matrix-matrix)."""
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim > 2 or bd.ndim > 2 or ad.shape[-1] != bd.shape[0]:
        raise ContractViolation(f"matmul: shape mismatch {list(ad.shape)} vs {list(bd.shape)}")
    out = ad @ bd
    if ad.ndim == 2 and bd.ndim == 2:
        def bw(g):
            return g @ bd.T, ad.T @ g
    elif ad.ndim == 1 and bd.ndim == 2:
        def bw(g):
            return bd @ g, np.outer(ad, g)
    elif ad.ndim == 2 and bd.ndim == 1:
        def bw(g):
            return np.outer(g, bd), ad.T @ g
    else:
        def bw(g):
            return g * bd, g * ad
    return make_node(out, (a, b), bw)


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractViolation("concatenate: no operands")
    ref = tensors[0].shape
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(
            x != y for k, (x, y) in enumerate(zip(t.shape, ref)) if k != axis % len(ref)
        ):
            raise ContractViolation(
                f"concatenate on axis {axis}: shape mismatch {list(ref)} vs {list(t.shape)}"
            )
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_node(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw)


def tanh(x):
    y = np.tanh(x.data)
    return make_node(y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x):
    y = 0.5 * (np.tanh(0.5 * x.data) + 1.0)
    return make_node(y, (x,), lambda g: (g * y * (1.0 - y),))


def exp(x):
    y = np.exp(x.data)
    return make_node(y, (x,), lambda g: (g * y,))


def log(x):
    xd = x.data
    if np.any(xd <= 0) or np.any(np.isnan(xd)):
        raise NumericDomainError(f"log of nonpositive value (min={xd.min()!r})")
    return make_node(np.log(xd), (x,), lambda g: (g / xd,))


def softmax_array(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax(x, axis=-1):
    y = softmax_array(x.data, axis)

    def bw(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_node(y, (x,), bw)


def max(x, axis=0):
    """Maximum along ``axis``; ties resolve to the lowest index, which alone receives gradient."""
    xd = x.data
    idx = np.expand_dims(np.argmax(xd, axis=axis), axis)
    out = np.take_along_axis(xd, idx, axis=axis).squeeze(axis)

    def bw(g):
        gx = np.zeros_like(xd)
        np.put_along_axis(gx, idx, np.expand_dims(g, axis), axis=axis)
        return (gx,)

    return make_node(out, (x,), bw)


def sum(x, axis=None):
    xd = x.data
    if axis is None:
        return make_node(np.array([xd.sum()]), (x,), lambda g: (np.full_like(xd, g[0]),))
    out = xd.sum(axis=axis)
    return make_node(out, (x,), lambda g: (np.broadcast_to(np.expand_dims(g, axis), xd.shape).copy(),))


def mean(x, axis=None):
    n = x.data.size if axis is None else x.data.shape[axis]
    return mul(sum(x, axis), 1.0 / n)


def tile(x, n, axis=0):
    """Stack ``n`` copies of ``x`` along a new axis inserted at ``axis``."""
    xd = x.data
    out = np.repeat(np.expand_dims(xd, axis), n, axis=axis)
    return make_node(out, (x,), lambda g: (g.sum(axis=axis),))


def take(x, idx):
    """Slice or integer-index ``x`` (numpy indexing semantics)."""
    xd = x.data
    out = xd[idx]
    basic = isinstance(idx, (int, slice)) or (
        isinstance(idx, tuple) and all(isinstance(i, (int, slice)) for i in idx)
    )

    def bw(g):
        gx = np.zeros_like(xd)
        if basic:
            gx[idx] += g
        else:
            np.add.at(gx, idx, g)
        return (gx,)

    return make_node(out, (x,), bw)


def embedding(table, ids):
    """Row lookup ``table[ids]``; ``ids`` may be any integer array."""
    ids = np.asarray(ids, dtype=np.int64)
    td = table.data
    if ids.size and (ids.min() < 0 or ids.max() >= td.shape[0]):
        raise ContractViolation(f"embedding: id out of range for table of shape {list(td.shape)}")

    def bw(g):
        gt = np.zeros_like(td)
        np.add.at(gt, ids, g)
        return (gt,)

    return make_node(td[ids], (table,), bw)


def transpose(x):
    return make_node(x.data.T, (x,), lambda g: (g.T,))


def reshape(x, shape):
    old = x.data.shape
    return make_node(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def dropout(x, p, rng, training):
    """Inverted dropout: identity in evaluation mode, survivors scaled by 1/(1-p) in training."""
    if not training or p <= 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ContractViolation(f"dropout probability must be in [0,1), got {p}")
    mask = (rng.random(x.data.shape) >= p) / (1.0 - p)
    return make_node(x.data * mask, (x,), lambda g: (g * mask,))


def backward(loss):
    """Accumulate d loss / d t into ``t.grad`` for every reachable tensor that requires grad."""
    if loss.data.shape != (1,):
        raise ContractViolation(f"backward: loss must have shape [1], got {list(loss.data.shape)}")
    if not loss.requires_grad:
        return
    nodes = {}
    stack = [loss]
    while stack:
        t = stack.pop()
        if t.id in nodes:
            continue
        nodes[t.id] = t
        for p in t.parents:
            if p.requires_grad and p.id not in nodes:
                stack.append(p)
    # Creation order is a topological order.
    order = sorted(nodes.values(), key=lambda t: t.id, reverse=True)
    for t in order:
        if t.parents:
            t.grad = None
    loss.grad = np.ones(1)
    for t in order:
        if t.backward_fn is None or t.grad is None:
            continue
        grads = t.backward_fn(t.grad)
        for p, gp in zip(t.parents, grads):
            if gp is None or not p.requires_grad:
                continue
            if p.grad is None:
                p.grad = np.array(gp, dtype=np.float64)
            else:
                p.grad = p.grad + gp


# --- optimisation -----------------------------------------------------------


@dataclass
class AdaDeltaState:
    sq_grad: np.ndarray
    sq_update: np.ndarray
    rho: float = 0.95
    eps: float = 1e-6

    @classmethod
    def zeros_like(cls, value, rho=0.95, eps=1e-6):
        return cls(np.zeros_like(value), np.zeros_like(value), rho, eps)


def adadelta_step(value, grad, state, lr=1.0):
    """One AdaDelta update. Returns ``(new_value, new_state)``; inputs are not modified."""
    if value.shape != grad.shape or state.sq_grad.shape != value.shape:
        raise ContractViolation(
            f"adadelta: shape mismatch {list(value.shape)} vs {list(grad.shape)} vs {list(state.sq_grad.shape)}"
        )
    rho, eps = state.rho, state.eps
    sq_grad = rho * state.sq_grad + (1.0 - rho) * grad * grad
    delta = -np.sqrt(state.sq_update + eps) / np.sqrt(sq_grad + eps) * grad
    sq_update = rho * state.sq_update + (1.0 - rho) * delta * delta
    return value + lr * delta, AdaDeltaState(sq_grad, sq_update, rho, eps)


class AdaDelta:
    """AdaDelta over a dict of named parameter tensors."""

    def __init__(self, params, rho=0.95, eps=1e-6, lr=1.0):
        self.params = dict(params)
        self.lr = lr
        self.state = {k: AdaDeltaState.zeros_like(p.data, rho, eps) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self, scale=1.0):
        for name, p in self.params.items():
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise NonFiniteGradient(name)
        for name, p in self.params.items():
            if p.grad is None:
                continue
            p.data, self.state[name] = adadelta_step(p.data, p.grad * scale, self.state[name], self.lr)

    def state_arrays(self):
        out = {}
        for name, st in self.state.items():
            out[f"opt/{name}/sq_grad"] = st.sq_grad
            out[f"opt/{name}/sq_update"] = st.sq_update
        return out

    def load_state_arrays(self, arrays):
        for name, st in self.state.items():
            st.sq_grad = np.array(arrays[f"opt/{name}/sq_grad"])
            st.sq_update = np.array(arrays[f"opt/{name}/sq_update"])


# --- gradient checking ------------------------------------------------------


def relative_error(analytic, numeric):
    a, n = np.ravel(analytic), np.ravel(numeric)
    denom = np.linalg.norm(a) + np.linalg.norm(n)
    if denom < 1e-12:
        return 0.0
    return float(np.linalg.norm(a - n) / denom)


def gradcheck(loss_fn, params, step=1e-4, max_entries=None, rng=None):
    """Compare analytic gradients against central finite differences.

    ``loss_fn()`` must rebuild the graph from ``params`` and return a shape-[1]
    tensor. Returns ``{name: relative_error}``; with ``max_entries`` only that
    many randomly chosen coordinates per parameter are perturbed.
    """
    rng = rng or np.random.default_rng(0)
    for p in params.values():
        p.zero_grad()
    loss = loss_fn()
    backward(loss)
    analytic = {k: p.grad.copy() for k, p in params.items()}
    errors = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            coords = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        numeric = np.empty(len(coords))
        with no_grad():
            for k, c in enumerate(coords):
                orig = flat[c]
                flat[c] = orig + step
                up = loss_fn().item()
                flat[c] = orig - step
                down = loss_fn().item()
                flat[c] = orig
                numeric[k] = (up - down) / (2 * step)
        errors[name] = relative_error(analytic[name].reshape(-1)[coords], numeric)
    return errors


# --- checkpoints ------------------------------------------------------------

MAGIC = b"KRD1"


def save_checkpoint(path, arrays):
    """Write named arrays as a KRD1 archive (entries in the given order)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes(order="C"))


class CheckpointError(ValueError):
    pass


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a KRD1 checkpoint")
    try:
        out, pos = _parse_entries(blob)
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt or truncated checkpoint ({e})") from None
    if pos != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - pos} trailing bytes")
    return out


def _parse_entries(blob):
    pos = 4
    (count,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        name = blob[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (rank,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        size = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(dims)
        pos += 8 * size
        out[name] = arr.astype(np.float64)
    return out, pos


def load_into(params, arrays, prefix=""):
    """Copy checkpoint arrays into parameter tensors, validating names and shapes."""
    missing = [k for k in params if prefix + k not in arrays]
    if missing:
        raise CheckpointError(f"checkpoint lacks parameters: {missing[:5]}")
    for name, p in params.items():
        arr = arrays[prefix + name]
        if arr.shape != p.data.shape:
            raise CheckpointError(
                f"shape mismatch for {name!r}: checkpoint {list(arr.shape)} vs model {list(p.data.shape)}"
            )
        p.data = np.array(arr)
