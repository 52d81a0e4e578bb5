"""Encoder classifier: multi-head attention over word vectors with a
pluggable positional-encoding scheme, a 1-d CNN sentence head, and a dense
softmax over three sentiments.

Pipeline per batch: embedding lookup -> (position rows added to the input
stream for the input-added schemes) -> N encoder layers (attention +
residual + layer norm, feed-forward + residual + layer norm, both optional)
-> CNN over the encoded sequence with masked max-pooling -> concatenation
with the tf-idf-weighted average of the raw word vectors -> dense logits.

Padding contract: batches are right-padded; boolean masks exclude PAD keys
from attention, PAD rows from the CNN input, and PAD steps from pooling, so
appending padding never changes a sentence's output.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import PAD_ID, TfIdfModel, Vocab, tfidf_weights
from .errors import CompatibilityError, ConfigError, LengthError, UsageError
from .posenc import (
    EVERY_LAYER_SCHEMES,
    INPUT_ADDED_SCHEMES,
    PEScheme,
    ProjectionSet,
    RelativeTable,
    ThetaTable,
    logits_relative,
    logits_sp_dynamic_relative,
    parse_scheme,
    plain_logits,
    sinusoidal_table,
    split_heads,
)
from .switchpoints import SPIVariant, clamp_spi, spi
from .tensor import (
    Graph,
    Tensor,
    add,
    backward,
    concat_last,
    conv1d,
    cross_entropy,
    dropout,
    embedding_rows,
    layer_norm,
    masked_max_time,
    matmul,
    mul,
    no_grad,
    relu,
    reshape,
    softmax_rows,
    swap_axes,
    weighted_time_sum,
)

CKPT_MAGIC = b"SWPECKPT"
CKPT_VERSION = 1

N_CLASSES = 3


@dataclass
class ModelConfig:
    """Architecture knobs. dim must be divisible by heads.

    attn_window = 0 means global attention; a positive value masks keys
    farther than that many positions from the query (PAD queries keep a
    full key row since their output is zeroed anyway).
    """

    dim: int = 120
    heads: int = 12
    layers: int = 2
    pe_scheme: str = "SINUSOIDAL"
    spi_variant: str = "reset_all"
    rel_k: int = 8
    p_max: int = 64
    cnn_filters: int = 64
    cnn_kernel: int = 3
    ffn_dim: int = 0  # 0 means 4 * dim
    use_layer_norm: bool = True
    use_ffn: bool = True
    dropout: float = 0.1
    attn_window: int = 0
    finetune_embeddings: bool = False
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.dim < 1 or self.heads < 1 or self.layers < 0:
            raise ConfigError("dim and heads must be >= 1, layers >= 0")
        if self.dim % self.heads != 0:
            raise ConfigError(f"dim {self.dim} is not divisible by {self.heads} heads")
        if self.cnn_kernel % 2 == 0:
            raise ConfigError(f"cnn_kernel must be odd, got {self.cnn_kernel}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.attn_window < 0:
            raise ConfigError(f"attn_window must be >= 0, got {self.attn_window}")
        parse_scheme(self.pe_scheme)
        try:
            SPIVariant(self.spi_variant)
        except ValueError:
            raise ConfigError(f"unknown spi_variant '{self.spi_variant}'") from None
        return self

    @property
    def scheme(self):
        return parse_scheme(self.pe_scheme)

    @property
    def variant(self):
        return SPIVariant(self.spi_variant)

    @property
    def ffn_width(self):
        return self.ffn_dim if self.ffn_dim > 0 else 4 * self.dim


@dataclass
class Batch:
    ids: np.ndarray        # (B, T) int64, right-padded with PAD_ID
    mask: np.ndarray       # (B, T) bool, True at real tokens
    spi: np.ndarray        # (B, T) int64, clamped; 0 at PAD
    tfw: np.ndarray        # (B, T) float64, normalized tf-idf weights; 0 at PAD
    labels: np.ndarray     # (B,) int64


class EncoderLayer:
    def __init__(self, cfg, scheme, rng):
        dim, f = cfg.dim, cfg.ffn_width
        self.proj = ProjectionSet(dim, cfg.heads, rng)
        self.theta = (
            ThetaTable(cfg.p_max, dim) if scheme is PEScheme.SP_DYNAMIC_RELATIVE else None
        )
        self.rel = (
            RelativeTable(cfg.rel_k, dim // cfg.heads)
            if scheme in EVERY_LAYER_SCHEMES
            else None
        )
        self.ffn_w1 = self.ffn_b1 = self.ffn_w2 = self.ffn_b2 = None
        if cfg.use_ffn:
            lim_in, lim_f = 1.0 / math.sqrt(dim), 1.0 / math.sqrt(f)
            self.ffn_w1 = Tensor(rng.uniform(-lim_in, lim_in, (dim, f)), requires_grad=True)
            self.ffn_b1 = Tensor(np.zeros(f), requires_grad=True)
            self.ffn_w2 = Tensor(rng.uniform(-lim_f, lim_f, (f, dim)), requires_grad=True)
            self.ffn_b2 = Tensor(np.zeros(dim), requires_grad=True)
        self.ln1_g = self.ln1_b = self.ln2_g = self.ln2_b = None
        if cfg.use_layer_norm:
            self.ln1_g = Tensor(np.ones(dim), requires_grad=True)
            self.ln1_b = Tensor(np.zeros(dim), requires_grad=True)
            if cfg.use_ffn:
                self.ln2_g = Tensor(np.ones(dim), requires_grad=True)
                self.ln2_b = Tensor(np.zeros(dim), requires_grad=True)

    def named_params(self, prefix):
        out = self.proj.params(prefix)
        if self.theta is not None:
            out.append((f"{prefix}.theta", self.theta.table))
        if self.rel is not None:
            out.append((f"{prefix}.rel", self.rel.table))
        for name in ("ffn_w1", "ffn_b1", "ffn_w2", "ffn_b2", "ln1_g", "ln1_b", "ln2_g", "ln2_b"):
            p = getattr(self, name)
            if p is not None:
                out.append((f"{prefix}.{name}", p))
        return out


class Model:
    """The classifier plus everything needed to run it: vocab and tf-idf."""

    def __init__(self, cfg, vocab, tfidf, word_vectors=None):
        cfg.validate()
        self.cfg = cfg
        self.vocab = vocab
        self.tfidf = tfidf
        scheme = cfg.scheme
        rng = np.random.default_rng(cfg.seed)
        v, d = len(vocab), cfg.dim

        if word_vectors is not None:
            word_vectors = np.asarray(word_vectors, dtype=np.float64)
            if word_vectors.shape != (v, d):
                raise CompatibilityError(
                    f"word vectors {word_vectors.shape} do not match vocab {v} x dim {d}")
            emb = word_vectors.copy()
        else:
            emb = rng.uniform(-1.0 / math.sqrt(d), 1.0 / math.sqrt(d), size=(v, d))
        emb[PAD_ID] = 0.0
        self.embedding = Tensor(emb, requires_grad=cfg.finetune_embeddings)

        self.sin_table = sinusoidal_table(cfg.p_max, d) if scheme is PEScheme.SINUSOIDAL else None
        self.theta0 = (
            ThetaTable(cfg.p_max, d)
            if scheme in (PEScheme.DYNAMIC, PEScheme.SP_DYNAMIC)
            else None
        )
        self.layers = [EncoderLayer(cfg, scheme, rng) for _ in range(cfg.layers)]

        c, kw = cfg.cnn_filters, cfg.cnn_kernel
        lim_c = 1.0 / math.sqrt(kw * d)
        self.conv = Tensor(rng.uniform(-lim_c, lim_c, (c, kw, d)), requires_grad=True)
        fan_in = c + d
        lim_d = 1.0 / math.sqrt(fan_in)
        self.dense_w = Tensor(rng.uniform(-lim_d, lim_d, (fan_in, N_CLASSES)), requires_grad=True)
        self.dense_b = Tensor(np.zeros(N_CLASSES), requires_grad=True)

    # -- parameters ---------------------------------------------------------

    def named_params(self):
        out = []
        if self.cfg.finetune_embeddings:
            out.append(("embedding", self.embedding))
        if self.theta0 is not None:
            out.append(("theta0", self.theta0.table))
        for i, layer in enumerate(self.layers):
            out.extend(layer.named_params(f"layer{i}"))
        out.extend([("conv", self.conv), ("dense_w", self.dense_w), ("dense_b", self.dense_b)])
        return out

    def all_param_arrays(self):
        """Every parameter including a frozen embedding, for checkpointing."""
        out = dict(self.named_params())
        out.setdefault("embedding", self.embedding)
        return out

    def zero_grad(self):
        for _, p in self.named_params():
            p.grad = None
        self.embedding.grad = None

    # -- batching -----------------------------------------------------------

    def make_batch(self, sentences):
        if not sentences:
            raise UsageError("cannot batch zero sentences")
        for s in sentences:
            if not s.tokens:
                raise UsageError(f"sentence '{s.uid}' is empty")
        cfg = self.cfg
        t = max(len(s.tokens) for s in sentences)
        b = len(sentences)
        ids = np.full((b, t), PAD_ID, dtype=np.int64)
        mask = np.zeros((b, t), dtype=bool)
        spi_mat = np.zeros((b, t), dtype=np.int64)
        tfw = np.zeros((b, t), dtype=np.float64)
        labels = np.zeros(b, dtype=np.int64)
        for r, s in enumerate(sentences):
            n = len(s.tokens)
            ids[r, :n] = self.vocab.encode(s.surfaces)
            mask[r, :n] = True
            vec = clamp_spi(spi(s.tags, cfg.variant), cfg.p_max)
            spi_mat[r, :n] = vec.indices
            w = tfidf_weights(ids[r, :n], self.tfidf)
            total = w.sum()
            tfw[r, :n] = (w / total) if total > 0 else (1.0 / n)
            labels[r] = s.label
        return Batch(ids=ids, mask=mask, spi=spi_mat, tfw=tfw, labels=labels)

    # -- forward ------------------------------------------------------------

    def _attention_mask(self, mask):
        b, t = mask.shape
        m = np.broadcast_to(mask[:, None, None, :], (b, 1, t, t)).copy()
        win = self.cfg.attn_window
        if win > 0:
            offs = np.abs(np.arange(t)[None, :] - np.arange(t)[:, None])
            m &= (offs <= win)[None, None, :, :]
        # PAD queries keep the plain key row so no softmax row is empty
        rows, cols = np.nonzero(~mask)
        m[rows, 0, cols, :] = mask[rows]
        return m

    def _layer_logits(self, layer, x, batch):
        scheme = self.cfg.scheme
        if scheme is PEScheme.RELATIVE:
            return logits_relative(x, layer.rel, layer.proj)
        if scheme is PEScheme.SP_DYNAMIC_RELATIVE:
            return logits_sp_dynamic_relative(x, batch.spi, layer.theta, layer.rel, layer.proj)
        return plain_logits(x, x, layer.proj)  # position rows already live in x

    def _mha(self, layer, x, batch, attn_mask, live, train, rng, collect):
        cfg = self.cfg
        weights = softmax_rows(self._layer_logits(layer, x, batch), mask=attn_mask)
        if collect is not None:
            collect.append(weights.data.copy())
        if train and cfg.dropout > 0.0:
            weights = dropout(weights, cfg.dropout, rng)
        b, t, d = x.shape
        v = split_heads(matmul(x, layer.proj.wv), cfg.heads)
        ctx = matmul(weights, v)
        merged = reshape(swap_axes(ctx, 1, 2), (b, t, d))
        out = matmul(merged, layer.proj.wo)
        return mul(out, live)

    def encode(self, batch, train=False, rng=None, collect_attention=None):
        """Encoder output (B, T, D) for an already-prepared batch."""
        cfg = self.cfg
        t = batch.ids.shape[1]
        x = embedding_rows(self.embedding, batch.ids)
        if cfg.layers == 0:
            return x
        scheme = cfg.scheme
        if scheme in INPUT_ADDED_SCHEMES:
            if t > cfg.p_max and scheme is not PEScheme.SP_DYNAMIC:
                raise LengthError(f"length {t} exceeds position table of {cfg.p_max}")
            if scheme is PEScheme.SINUSOIDAL:
                x = add(x, Tensor(self.sin_table[:t]))
            elif scheme is PEScheme.DYNAMIC:
                x = add(x, self.theta0.rows(np.arange(t)))
            else:  # SP_DYNAMIC; indices are already clamped to the table
                x = add(x, self.theta0.rows(batch.spi))
        attn_mask = self._attention_mask(batch.mask)
        live = Tensor(batch.mask.astype(np.float64)[:, :, None])
        for layer in self.layers:
            att = self._mha(layer, x, batch, attn_mask, live, train, rng, collect_attention)
            x = add(x, att)
            if cfg.use_layer_norm:
                x = layer_norm(x, layer.ln1_g, layer.ln1_b)
            if cfg.use_ffn:
                h = relu(add(matmul(x, layer.ffn_w1), layer.ffn_b1))
                if train and cfg.dropout > 0.0:
                    h = dropout(h, cfg.dropout, rng)
                f = add(matmul(h, layer.ffn_w2), layer.ffn_b2)
                x = add(x, f)
                if cfg.use_layer_norm:
                    x = layer_norm(x, layer.ln2_g, layer.ln2_b)
        return x

    def logits(self, batch, train=False, rng=None, collect_attention=None):
        enc = self.encode(batch, train=train, rng=rng, collect_attention=collect_attention)
        live = Tensor(batch.mask.astype(np.float64)[:, :, None])
        feat = relu(conv1d(mul(enc, live), self.conv))
        pooled = masked_max_time(feat, batch.mask)
        words = embedding_rows(self.embedding, batch.ids)
        sent = weighted_time_sum(words, Tensor(batch.tfw))
        joined = concat_last([pooled, sent])
        return add(matmul(joined, self.dense_w), self.dense_b)

    def loss(self, batch, train=False, rng=None):
        return cross_entropy(self.logits(batch, train=train, rng=rng), batch.labels)

    def predict_proba(self, sentences):
        batch = self.make_batch(sentences)
        with no_grad():
            return softmax_rows(self.logits(batch)).data

    def predict(self, sentences):
        return self.predict_proba(sentences).argmax(axis=1)


def classify(sentence, model):
    """Probability vector over (negative, neutral, positive) for one sentence."""
    if not sentence.tokens:
        raise UsageError("cannot classify an empty sentence")
    return model.predict_proba([sentence])[0]


def loss_and_grads(model, batch):
    """Mean cross-entropy and named gradients; PAD embedding grad zeroed."""
    model.zero_grad()
    with Graph():
        loss = model.loss(batch, train=False)
        backward(loss)
    if model.embedding.grad is not None:
        model.embedding.grad[PAD_ID] = 0.0
    grads = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in model.named_params()
    }
    return loss.item(), grads


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------


def save_checkpoint(path, model, extra_config=None):
    """Single self-contained binary: config echo, vocab, tf-idf, parameters."""
    params = model.all_param_arrays()
    names = sorted(params)
    header = {
        "model_config": asdict(model.cfg),
        "extra_config": dict(extra_config or {}),
        "vocab": model.vocab.id_to_token,
        "tfidf": {
            "n_docs": model.tfidf.n_docs,
            "df": model.tfidf.df.tolist(),
        },
        "params": [{"name": n, "shape": list(params[n].data.shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<IQ", CKPT_VERSION, len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(params[n].data).tobytes())


def load_checkpoint(path):
    """Rebuild a runnable Model (vocab and tf-idf included) from a file."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CKPT_MAGIC))
        if magic != CKPT_MAGIC:
            raise CompatibilityError(f"not a checkpoint file (magic {magic!r})")
        version, blob_len = struct.unpack("<IQ", fh.read(12))
        if version != CKPT_VERSION:
            raise CompatibilityError(f"checkpoint version {version} unsupported")
        header = json.loads(fh.read(blob_len).decode("utf-8"))
        vocab = Vocab(header["vocab"])
        tfidf = TfIdfModel(
            n_docs=header["tfidf"]["n_docs"],
            df_by_id=dict(enumerate(header["tfidf"]["df"])),
            vocab_size=len(vocab),
        )
        cfg = ModelConfig(**header["model_config"])
        model = Model(cfg, vocab, tfidf)
        params = model.all_param_arrays()
        for meta in header["params"]:
            name, shape = meta["name"], tuple(meta["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(count * 8), dtype=np.float64).reshape(shape)
            if name not in params:
                raise CompatibilityError(f"checkpoint parameter '{name}' unknown to this config")
            if params[name].data.shape != shape:
                raise CompatibilityError(
                    f"parameter '{name}' shape {shape} does not match {params[name].data.shape}")
            params[name].data[...] = data
    return model, header["extra_config"]
