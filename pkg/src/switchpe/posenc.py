"""Five positional-encoding schemes behind one attention-logit interface.

Every kernel maps a (B, T, D) input to pre-softmax attention logits of shape
(B, H, T, T), scaled by 1/sqrt(d_head):

- SINUSOIDAL adds fixed sin/cos position rows to the tokens before the
  query/key projections.
- DYNAMIC does the same with a learnable row per raw position.
- RELATIVE leaves tokens untouched and adds a learnable per-offset vector on
  the key side, offsets clipped to [-k, k].
- SP_DYNAMIC indexes the learnable table by the switching-point index
  instead of the raw position, so counting restarts at language boundaries.
- SP_DYNAMIC_RELATIVE combines the last two: switching-point-indexed rows on
  queries and keys plus the per-offset key-side term, per layer.

Zeroing the learnable tables collapses the richer schemes onto the simpler
ones exactly, which the tests pin down as an equality lattice.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .errors import ConfigError, LengthError, UsageError
from .tensor import (
    Tensor,
    add,
    div,
    embedding_rows,
    matmul,
    reshape,
    swap_axes,
    take_pairs,
    transpose_last2,
)

P_MAX_DEFAULT = 64
REL_K_DEFAULT = 8


class PEScheme(Enum):
    SINUSOIDAL = "SINUSOIDAL"
    DYNAMIC = "DYNAMIC"
    RELATIVE = "RELATIVE"
    SP_DYNAMIC = "SP_DYNAMIC"
    SP_DYNAMIC_RELATIVE = "SP_DYNAMIC_RELATIVE"


SP_SCHEMES = (PEScheme.SP_DYNAMIC, PEScheme.SP_DYNAMIC_RELATIVE)
EVERY_LAYER_SCHEMES = (PEScheme.RELATIVE, PEScheme.SP_DYNAMIC_RELATIVE)
INPUT_ADDED_SCHEMES = (PEScheme.SINUSOIDAL, PEScheme.DYNAMIC, PEScheme.SP_DYNAMIC)


def parse_scheme(name):
    try:
        return PEScheme[str(name)]
    except KeyError:
        valid = ", ".join(s.name for s in PEScheme)
        raise ConfigError(f"unknown pe_scheme '{name}' (expected one of {valid})") from None


def sinusoidal_table(p_max, dim):
    """Fixed position table: row i holds interleaved sin/cos of i at D/2 rates."""
    if dim % 2 != 0:
        raise ConfigError(f"sinusoidal dimension must be even, got {dim}")
    pos = np.arange(p_max, dtype=np.float64)[:, None]
    rates = 10000.0 ** (np.arange(0, dim, 2, dtype=np.float64) / dim)
    angles = pos / rates
    table = np.zeros((p_max, dim))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return table


def sinusoidal_pe(position, dim):
    if position < 0:
        raise UsageError(f"position must be >= 0, got {position}")
    return sinusoidal_table(position + 1, dim)[position]


class ThetaTable:
    """Learnable position-row table, indexed by raw position or by SPI."""

    def __init__(self, p_max, dim, rng=None, init_scale=0.0):
        if p_max < 1:
            raise ConfigError(f"table needs at least one row, got {p_max}")
        if init_scale > 0.0 and rng is None:
            raise ConfigError("random init requires an rng")
        data = np.zeros((p_max, dim))
        if init_scale > 0.0:
            data = rng.normal(0.0, init_scale, size=(p_max, dim))
        self.p_max = p_max
        self.table = Tensor(data, requires_grad=True)

    def rows(self, indices):
        return embedding_rows(self.table, indices)


class RelativeTable:
    """Learnable per-offset key vectors, shared across heads within a layer."""

    def __init__(self, k, d_head, rng=None, init_scale=0.0):
        if k < 1:
            raise ConfigError(f"clipping distance must be >= 1, got {k}")
        data = np.zeros((2 * k + 1, d_head))
        if init_scale > 0.0:
            if rng is None:
                raise ConfigError("random init requires an rng")
            data = rng.normal(0.0, init_scale, size=(2 * k + 1, d_head))
        self.k = k
        self.table = Tensor(data, requires_grad=True)

    def offset_index(self, t):
        """(T, T) int matrix: entry [i, j] = clip(j - i, -k, k) + k."""
        offs = np.arange(t)[None, :] - np.arange(t)[:, None]
        return np.clip(offs, -self.k, self.k) + self.k


class ProjectionSet:
    """Query/key/value and output projections for one encoder layer.

    wq/wk/wv are (D, D) with head h occupying the h-th block of d_head
    columns, which is the concatenation of per-head (D, d_head) matrices.
    """

    def __init__(self, dim, heads, rng):
        if dim % heads != 0:
            raise ConfigError(f"model dim {dim} is not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.d_head = dim // heads
        limit = 1.0 / math.sqrt(dim)
        self.wq = Tensor(rng.uniform(-limit, limit, size=(dim, dim)), requires_grad=True)
        self.wk = Tensor(rng.uniform(-limit, limit, size=(dim, dim)), requires_grad=True)
        self.wv = Tensor(rng.uniform(-limit, limit, size=(dim, dim)), requires_grad=True)
        self.wo = Tensor(rng.uniform(-limit, limit, size=(dim, dim)), requires_grad=True)

    def params(self, prefix):
        return [
            (f"{prefix}.wq", self.wq),
            (f"{prefix}.wk", self.wk),
            (f"{prefix}.wv", self.wv),
            (f"{prefix}.wo", self.wo),
        ]


def split_heads(x, heads):
    """(B, T, D) -> (B, H, T, d_head) by slicing D into per-head blocks."""
    b, t, d = x.shape
    return swap_axes(reshape(x, (b, t, heads, d // heads)), 1, 2)


def _check_input(x):
    if x.ndim != 3:
        raise UsageError(f"kernels take (B, T, D) input, got shape {x.shape}")


def _check_spi(spi_indices, b, t):
    spi_indices = np.asarray(spi_indices, dtype=np.int64)
    if spi_indices.shape != (b, t):
        raise UsageError(
            f"spi index matrix {spi_indices.shape} does not match batch ({b}, {t})")
    return spi_indices


def plain_logits(xq, xk, proj):
    """Scaled dot-product logits (B, H, T, T) with no positional term."""
    q = split_heads(matmul(xq, proj.wq), proj.heads)
    k = split_heads(matmul(xk, proj.wk), proj.heads)
    return div(matmul(q, transpose_last2(k)), math.sqrt(proj.d_head))


def _relative_logits(xq, xk, rel, proj):
    q = split_heads(matmul(xq, proj.wq), proj.heads)
    k = split_heads(matmul(xk, proj.wk), proj.heads)
    content = matmul(q, transpose_last2(k))
    per_offset = matmul(q, transpose_last2(rel.table))  # (B, H, T, 2k+1)
    position = take_pairs(per_offset, rel.offset_index(xq.shape[1]))
    return div(add(content, position), math.sqrt(proj.d_head))


def logits_sinusoidal(w, proj, table):
    """Fixed sin/cos rows added to the tokens before projection."""
    _check_input(w)
    t = w.shape[1]
    if t > table.shape[0]:
        raise LengthError(f"sequence length {t} exceeds position table of {table.shape[0]}")
    x = add(w, Tensor(table[:t]))
    return plain_logits(x, x, proj)


def logits_dynamic(w, theta, proj):
    """Learnable rows indexed by raw position, added before projection."""
    _check_input(w)
    t = w.shape[1]
    if t > theta.p_max:
        raise LengthError(f"sequence length {t} exceeds position table of {theta.p_max}")
    x = add(w, theta.rows(np.arange(t)))
    return plain_logits(x, x, proj)


def logits_relative(x, rel, proj):
    """Per-offset key-side vectors; tokens enter the projections untouched."""
    _check_input(x)
    return _relative_logits(x, x, rel, proj)


def logits_sp_dynamic(w, spi_indices, theta, proj):
    """Learnable rows indexed by the switching-point index, added before projection."""
    _check_input(w)
    b, t, _ = w.shape
    spi_indices = _check_spi(spi_indices, b, t)
    x = add(w, theta.rows(spi_indices))
    return plain_logits(x, x, proj)


def logits_sp_dynamic_relative(x, spi_indices, theta, rel, proj):
    """Switching-point rows on queries and keys plus the per-offset key term."""
    _check_input(x)
    b, t, _ = x.shape
    spi_indices = _check_spi(spi_indices, b, t)
    aug = add(x, theta.rows(spi_indices))
    return _relative_logits(aug, aug, rel, proj)
