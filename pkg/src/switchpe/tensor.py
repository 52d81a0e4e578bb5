"""Dense float64 tensors with tape-based reverse-mode automatic differentiation.

Every value is a row-major numpy float64 array. Operations compute eagerly and
append a node to a thread-local tape; ``backward`` replays the tape in exact
reverse append order, accumulating gradients into ``.grad`` buffers. Repeated
backward calls without zeroing accumulate additively.
"""

from __future__ import annotations

import threading

import numpy as np

from .errors import ConfigError, DataError, ShapeError, UsageError

MASK_FILL = -1e30
LN_EPS = 1e-5


class _TapeState(threading.local):
    def __init__(self):
        self.graph = None
        self.recording = True


_STATE = _TapeState()


class Node:
    """One recorded operation: inputs, output, and a vector-Jacobian closure."""

    __slots__ = ("inputs", "output", "vjp")

    def __init__(self, inputs, output, vjp):
        self.inputs = inputs
        self.output = output
        self.vjp = vjp


class Graph:
    """Append-only record of applied operations.

    Usable as a context manager to scope recording, e.g. one graph per
    training step so old nodes are dropped:

        with Graph():
            loss = model_loss(...)
            backward(loss)
    """

    def __init__(self):
        self.nodes = []
        self._outer = None

    def __enter__(self):
        self._outer = _STATE.graph
        _STATE.graph = self
        return self

    def __exit__(self, *exc):
        _STATE.graph = self._outer
        self._outer = None
        return False


class no_grad:
    """Context manager that disables tape recording."""

    def __enter__(self):
        self._prev = _STATE.recording
        _STATE.recording = False
        return self

    def __exit__(self, *exc):
        _STATE.recording = self._prev
        return False


def active_graph():
    """Return the current graph, creating a default one on first use."""
    if _STATE.graph is None:
        _STATE.graph = Graph()
    return _STATE.graph


class Tensor:
    """Dense n-dimensional float64 array with an optional gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64, order="C")
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _as_mask(mask):
    if mask is None:
        return None
    if isinstance(mask, Tensor):
        mask = mask.data
    return np.asarray(mask, dtype=bool)


def _record(out, inputs, vjp):
    if _STATE.recording and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        active_graph().nodes.append(Node(inputs, out, vjp))
    return out


def _unbroadcast(grad, shape):
    """Reduce a broadcasted gradient back to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] > 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(loss):
    """Accumulate reverse-mode gradients of a scalar loss into .grad buffers.

    Walks the active graph's nodes in exact reverse append order. Every
    tensor with ``requires_grad`` reached by the walk has its gradient added
    to ``.grad``; calling twice without zeroing doubles the result.
    """
    if not isinstance(loss, Tensor):
        raise UsageError("backward expects a Tensor")
    if loss.data.shape != ():
        raise UsageError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    graph = active_graph()
    flowing = {id(loss): np.ones((), dtype=np.float64)}
    for node in reversed(graph.nodes):
        g = flowing.get(id(node.output))
        if g is None:
            continue
        for t, gt in zip(node.inputs, node.vjp(g)):
            if gt is None:
                continue
            key = id(t)
            prev = flowing.get(key)
            flowing[key] = gt if prev is None else prev + gt

    seen = set()

    def settle(t):
        key = id(t)
        if key in seen:
            return
        seen.add(key)
        if t.requires_grad and key in flowing:
            g = flowing[key]
            t.grad = g.copy() if t.grad is None else t.grad + g

    settle(loss)
    for node in graph.nodes:
        settle(node.output)
        for t in node.inputs:
            settle(t)


# ---------------------------------------------------------------------------
# elementwise and linear-algebra primitives
# ---------------------------------------------------------------------------


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _record(out, (a, b), vjp)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data - b.data)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _record(out, (a, b), vjp)


def neg(a):
    out = Tensor(-a.data)
    return _record(out, (a,), lambda g: (-g,))


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data * b.data)

    def vjp(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return _record(out, (a, b), vjp)


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data / b.data)

    def vjp(g):
        ga = _unbroadcast(g / b.data, a.data.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)
        return ga, gb

    return _record(out, (a, b), vjp)


def matmul(a, b):
    """Matrix product with leading batch dimensions broadcast numpy-style."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    out = Tensor(a.data @ b.data)

    def vjp(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape)
        return ga, gb

    return _record(out, (a, b), vjp)


def transpose_last2(a):
    out = Tensor(np.swapaxes(a.data, -1, -2))
    return _record(out, (a,), lambda g: (np.swapaxes(g, -1, -2),))


def reshape(a, shape):
    out = Tensor(a.data.reshape(shape))
    old = a.data.shape
    return _record(out, (a,), lambda g: (g.reshape(old),))


def swap_axes(a, ax1, ax2):
    out = Tensor(np.swapaxes(a.data, ax1, ax2))
    return _record(out, (a,), lambda g: (np.swapaxes(g, ax1, ax2),))


def relu(a):
    out = Tensor(np.maximum(a.data, 0.0))
    keep = a.data > 0
    return _record(out, (a,), lambda g: (g * keep,))


def log_sigmoid(a):
    """Numerically stable log(sigmoid(x))."""
    out = Tensor(-np.logaddexp(0.0, -a.data))
    sig_neg = np.exp(-np.logaddexp(0.0, a.data))  # sigmoid(-x)
    return _record(out, (a,), lambda g: (g * sig_neg,))


def sum_all(a):
    out = Tensor(a.data.sum())
    shape = a.data.shape
    return _record(out, (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean_all(a):
    n = a.data.size
    out = Tensor(a.data.sum() / n)
    shape = a.data.shape
    return _record(out, (a,), lambda g: (np.full(shape, float(g) / n),))


def sum_last(a):
    out = Tensor(a.data.sum(axis=-1))

    def vjp(g):
        return (np.repeat(g[..., None], a.data.shape[-1], axis=-1),)

    return _record(out, (a,), vjp)


def concat_last(tensors):
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise UsageError("concat_last needs at least one tensor")
    lead = tensors[0].shape[:-1]
    for t in tensors[1:]:
        if t.shape[:-1] != lead:
            raise ShapeError(f"concat_last leading shapes disagree: {tensors[0].shape} vs {t.shape}")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=-1))
    widths = [t.shape[-1] for t in tensors]

    def vjp(g):
        grads, start = [], 0
        for w in widths:
            grads.append(g[..., start:start + w])
            start += w
        return tuple(grads)

    return _record(out, tuple(tensors), vjp)


# ---------------------------------------------------------------------------
# neural-net primitives
# ---------------------------------------------------------------------------


def softmax_rows(x, mask=None):
    """Row-wise softmax over the last axis, numerically stabilized.

    ``mask`` is a boolean array broadcastable to ``x`` with True for live
    positions. Masked positions receive an additive ``MASK_FILL`` before
    normalization and are then zeroed exactly. A fully masked row is an error.
    """
    x = _as_tensor(x)
    m = _as_mask(mask)
    z = x.data
    if m is not None:
        m = np.broadcast_to(m, z.shape)
        if not m.any(axis=-1).all():
            raise UsageError("softmax_rows: at least one row is fully masked")
        z = z + np.where(m, 0.0, MASK_FILL)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    if m is not None:
        e = np.where(m, e, 0.0)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y)

    def vjp(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return (y * (g - dot),)

    return _record(out, (x,), vjp)


def conv1d(x, kernels):
    """1-d cross-correlation over the time axis with same-size zero padding.

    ``x`` is (..., T, D), ``kernels`` is (C, kw, D) with odd kw; the result is
    (..., T, C).
    """
    x, kernels = _as_tensor(x), _as_tensor(kernels)
    if kernels.ndim != 3:
        raise ShapeError(f"conv1d kernels must be (C, kw, D), got {kernels.shape}")
    c, kw, d = kernels.shape
    if kw % 2 == 0:
        raise ConfigError(f"conv1d kernel width must be odd, got {kw}")
    if x.ndim < 2 or x.shape[-1] != d:
        raise ShapeError(f"conv1d input {x.shape} does not match kernel depth {d}")
    t = x.shape[-2]
    r = kw // 2
    pad = [(0, 0)] * (x.ndim - 2) + [(r, r), (0, 0)]
    xp = np.pad(x.data, pad)
    out_data = np.zeros(x.shape[:-1] + (c,))
    for o in range(kw):
        out_data += xp[..., o:o + t, :] @ kernels.data[:, o, :].T
    out = Tensor(out_data)

    def vjp(g):
        gf = g.reshape(-1, t, c)
        xpf = xp.reshape(-1, t + 2 * r, d)
        gk = np.zeros_like(kernels.data)
        gxp = np.zeros_like(xpf)
        for o in range(kw):
            gk[:, o, :] = np.einsum("ntc,ntd->cd", gf, xpf[:, o:o + t, :])
            gxp[:, o:o + t, :] += gf @ kernels.data[:, o, :]
        gx = gxp[:, r:r + t, :].reshape(x.data.shape)
        return gx, gk

    return _record(out, (x, kernels), vjp)


def layer_norm(x, gain, bias, eps=LN_EPS):
    """Normalize each row over the last axis to zero mean, unit variance."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = Tensor(xhat * gain.data + bias.data)

    def vjp(g):
        ggain = _unbroadcast(g * xhat, gain.data.shape)
        gbias = _unbroadcast(g, bias.data.shape)
        dxhat = g * gain.data
        gx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, ggain, gbias

    return _record(out, (x, gain, bias), vjp)


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of integer labels under row softmax."""
    logits = _as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects (B, K) logits, got {logits.shape}")
    b, k = logits.shape
    if labels.shape != (b,):
        raise ShapeError(f"labels shape {labels.shape} does not match batch {b}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise DataError(f"labels must lie in [0, {k}), got range "
                        f"[{labels.min()}, {labels.max()}]")
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - lse
    out = Tensor(-logp[np.arange(b), labels].mean())
    probs = np.exp(logp)

    def vjp(g):
        gl = probs.copy()
        gl[np.arange(b), labels] -= 1.0
        return (gl * (float(g) / b),)

    return _record(out, (logits,), vjp)


def embedding_rows(table, indices):
    """Gather rows of a 2-d table; gradient scatter-adds back into the table."""
    table = _as_tensor(table)
    idx = np.asarray(indices, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"embedding_rows table must be 2-d, got {table.shape}")
    v, d = table.shape
    if idx.size and (idx.min() < 0 or idx.max() >= v):
        raise DataError(f"row indices out of range [0, {v}): "
                        f"[{idx.min()}, {idx.max()}]")
    out = Tensor(table.data[idx])

    def vjp(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx.reshape(-1), g.reshape(-1, d))
        return (gt,)

    return _record(out, (table,), vjp)


def take_pairs(m, col_index):
    """Select out[..., i, j] = m[..., i, col_index[i, j]].

    ``col_index`` is a shared integer matrix applied across all leading batch
    dimensions; the gradient scatter-adds along the last axis.
    """
    m = _as_tensor(m)
    colidx = np.asarray(col_index, dtype=np.int64)
    if m.ndim < 2 or colidx.ndim != 2:
        raise ShapeError(f"take_pairs expects (..., R, C) and (R, J), got {m.shape}, {colidx.shape}")
    r, c = m.shape[-2], m.shape[-1]
    if colidx.shape[0] != r:
        raise ShapeError(f"take_pairs row counts disagree: {m.shape} vs {colidx.shape}")
    if colidx.size and (colidx.min() < 0 or colidx.max() >= c):
        raise DataError(f"column indices out of range [0, {c})")
    j = colidx.shape[1]
    bc = np.broadcast_to(colidx, m.shape[:-2] + colidx.shape)
    out = Tensor(np.take_along_axis(m.data, bc, axis=-1))

    def vjp(g):
        gm = np.zeros_like(m.data)
        gm3 = gm.reshape(-1, r, c)
        g3 = g.reshape(-1, r, j)
        nn = np.arange(gm3.shape[0])[:, None, None]
        rr = np.arange(r)[None, :, None]
        np.add.at(gm3, (nn, rr, colidx[None, :, :]), g3)
        return (gm,)

    return _record(out, (m,), vjp)


def masked_max_time(x, mask):
    """Max over the time axis of (..., T, C), restricted to unmasked steps.

    Gradient flows to the first maximizing step per channel.
    """
    x = _as_tensor(x)
    m = _as_mask(mask)
    if m is None:
        m = np.ones(x.shape[:-1], dtype=bool)
    m = np.broadcast_to(m, x.shape[:-1])
    if not m.any(axis=-1).all():
        raise UsageError("masked_max_time: a row has no unmasked timestep")
    t, c = x.shape[-2], x.shape[-1]
    xm = np.where(m[..., None], x.data, -np.inf)
    out = Tensor(xm.max(axis=-2))
    arg = xm.argmax(axis=-2)

    def vjp(g):
        gx = np.zeros_like(x.data)
        gx3 = gx.reshape(-1, t, c)
        g2 = g.reshape(-1, c)
        arg2 = arg.reshape(-1, c)
        nn = np.arange(gx3.shape[0])[:, None]
        cc = np.arange(c)[None, :]
        np.add.at(gx3, (nn, arg2, cc), g2)
        return (gx,)

    return _record(out, (x,), vjp)


def weighted_time_sum(x, w):
    """Weighted sum over time: out[..., d] = sum_t w[..., t] * x[..., t, d]."""
    x, w = _as_tensor(x), _as_tensor(w)
    if x.ndim < 2 or w.shape != x.shape[:-1]:
        raise ShapeError(f"weighted_time_sum shapes disagree: {x.shape} vs {w.shape}")
    out = Tensor(np.einsum("...td,...t->...d", x.data, w.data))

    def vjp(g):
        gx = w.data[..., :, None] * g[..., None, :]
        gw = np.einsum("...td,...d->...t", x.data, g)
        return gx, gw

    return _record(out, (x, w), vjp)


def dropout(x, p, rng):
    """Inverted dropout with keep-probability 1-p, drawn from ``rng``."""
    if p <= 0.0:
        return x
    if p >= 1.0:
        raise ConfigError(f"dropout probability must be < 1, got {p}")
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return mul(x, Tensor(keep))
