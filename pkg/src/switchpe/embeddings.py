"""Skipgram word vectors with negative sampling, and sentence embeddings.

The skipgram objective is binary logistic: each observed (center, context)
pair is pushed toward score 1 while sampled negatives (unigram^0.75
distribution) are pushed toward 0. Training runs on the in-package autodiff
substrate with plain gradient steps and a linearly decaying learning rate,
so its gradients are checkable against finite differences like every other
component.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import PAD_ID, UNK_ID, Sentence, Vocab, tfidf_weights
from .errors import CompatibilityError, ConfigError, DataError, UsageError, VocabError
from .tensor import (
    Graph,
    Tensor,
    backward,
    div,
    embedding_rows,
    log_sigmoid,
    mul,
    neg,
    reshape,
    sum_all,
    sum_last,
)

EMB_MAGIC = b"SWPEEMB1"

# Chunk-accumulated steps apply many same-row updates at once with stale
# gradients; on tiny vocabularies this can feed back into a blowup. Capping
# the step norm keeps those regimes bounded without touching healthy runs.
STEP_NORM_CAP = 5.0


@dataclass
class SkipgramConfig:
    window: int = 3
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025  # per-pair step size at the start of the decay schedule
    subsample: float = 0.0  # 0 disables frequent-word downsampling
    dim: int = 128
    batch_size: int = 256


class Embeddings:
    """Trained word vectors: a vocab plus a (V, D) float64 matrix."""

    def __init__(self, vocab, vectors):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(vocab):
            raise CompatibilityError(
                f"vector matrix {vectors.shape} does not match vocab of {len(vocab)}")
        self.vocab = vocab
        self.vectors = vectors

    @property
    def dim(self):
        return self.vectors.shape[1]

    def vector(self, surface):
        return self.vectors[self.vocab.id_of(surface)]

    def nearest_neighbors(self, surface, k):
        """Top-k tokens by cosine similarity, excluding the query, PAD, UNK."""
        low = surface.lower()
        if low not in self.vocab.token_to_id:
            raise VocabError(f"'{surface}' is not in the vocabulary")
        qid = self.vocab.token_to_id[low]
        if k <= 0:
            return []
        q = self.vectors[qid]
        qn = np.linalg.norm(q)
        norms = np.linalg.norm(self.vectors, axis=1)
        denom = np.where((norms > 0) & (qn > 0), norms * qn, np.inf)
        sims = self.vectors @ q / denom
        sims[[qid, PAD_ID, UNK_ID]] = -np.inf
        order = np.argsort(-sims, kind="stable")
        picked = [int(i) for i in order if np.isfinite(sims[i])][:k]
        return [self.vocab.id_to_token[i] for i in picked]

    def save(self, path):
        vocab_block = "\n".join(self.vocab.id_to_token).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(EMB_MAGIC)
            fh.write(struct.pack("<IIQ", len(self.vocab), self.dim, len(vocab_block)))
            fh.write(vocab_block)
            fh.write(np.ascontiguousarray(self.vectors).tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            magic = fh.read(len(EMB_MAGIC))
            if magic != EMB_MAGIC:
                raise CompatibilityError(f"not an embedding file (magic {magic!r})")
            v, d, block_len = struct.unpack("<IIQ", fh.read(16))
            tokens = fh.read(block_len).decode("utf-8").split("\n")
            if len(tokens) != v:
                raise CompatibilityError(f"vocab block has {len(tokens)} tokens, header says {v}")
            vectors = np.frombuffer(fh.read(v * d * 8), dtype=np.float64).reshape(v, d)
        return cls(Vocab(tokens), vectors.copy())

    def export_tsv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for token, row in zip(self.vocab.id_to_token, self.vectors):
                fh.write(token + "\t" + "\t".join(repr(float(x)) for x in row) + "\n")


def skipgram_pairs(sentences, vocab, window):
    """All (center, context) id pairs within the window, in corpus order."""
    pairs = []
    for s in sentences:
        ids = vocab.encode(s.surfaces)
        n = len(ids)
        for i in range(n):
            for j in range(max(0, i - window), min(n, i + window + 1)):
                if j != i:
                    pairs.append((ids[i], ids[j]))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def negative_distribution(sentences, vocab):
    """Unigram distribution raised to the 3/4 power; PAD has zero mass."""
    counts = Counter()
    for s in sentences:
        counts.update(vocab.encode(s.surfaces))
    freq = np.zeros(len(vocab), dtype=np.float64)
    for i, c in counts.items():
        freq[i] = c
    freq[PAD_ID] = 0.0
    weights = freq ** 0.75
    total = weights.sum()
    if total == 0:
        raise DataError("corpus has no tokens to sample negatives from")
    return weights / total


def skipgram_loss(w_in, w_out, centers, contexts, negatives):
    """Mean negative-sampling loss over a batch of pairs.

    centers/contexts are (P,) id arrays; negatives is (P, K). The loss is
    -log sigma(u.v_pos) - sum_k log sigma(-u.v_neg_k), averaged over pairs.
    """
    p = len(centers)
    u = embedding_rows(w_in, centers)
    v_pos = embedding_rows(w_out, contexts)
    pos_term = log_sigmoid(sum_last(mul(u, v_pos)))
    v_neg = embedding_rows(w_out, negatives)
    u3 = reshape(u, (p, 1, u.shape[-1]))
    neg_term = log_sigmoid(neg(sum_last(mul(u3, v_neg))))
    total = sum_all(pos_term) + sum_all(neg_term)
    return div(neg(total), float(p))


def _subsample(sentences, vocab, threshold, rng):
    counts = Counter()
    for s in sentences:
        counts.update(vocab.encode(s.surfaces))
    total = sum(counts.values())
    keep = {}
    for i, c in counts.items():
        f = c / total
        keep[i] = min(1.0, np.sqrt(threshold / f)) if f > threshold else 1.0
    kept = []
    for s in sentences:
        ids = vocab.encode(s.surfaces)
        flags = [rng.random() < keep[i] for i in ids]
        kept.append([t for t, f in zip(s.tokens, flags) if f])
    return kept


def train_skipgram(sentences, vocab, cfg, seed):
    """Train word vectors; deterministic for a fixed seed.

    Gradient descent on chunked pair batches; since skipgram_loss averages
    over its chunk, the step is scaled by chunk size so it matches one
    plain step per pair. The rate decays linearly toward a small floor.
    Returns the input (center) matrix wrapped as Embeddings. The PAD row is
    zero-initialized and never sampled, so it stays exactly zero.
    """
    if not sentences:
        raise DataError("cannot train embeddings on an empty corpus")
    if cfg.window < 1:
        raise ConfigError(f"window must be >= 1, got {cfg.window}")
    if cfg.negatives < 1:
        raise ConfigError(f"negatives must be >= 1, got {cfg.negatives}")
    rng = np.random.default_rng(seed)
    v, d = len(vocab), cfg.dim
    w_in = Tensor(rng.uniform(-0.5, 0.5, size=(v, d)) / d, requires_grad=True)
    w_in.data[PAD_ID] = 0.0
    w_out = Tensor(np.zeros((v, d)), requires_grad=True)
    probs = negative_distribution(sentences, vocab)

    base_pairs = skipgram_pairs(sentences, vocab, cfg.window)
    # Decay horizon from the unsubsampled pair count; subsampled epochs have
    # fewer chunks, so the schedule simply ends above the floor.
    chunks_per_epoch = max(1, -(-base_pairs.shape[0] // cfg.batch_size))
    total_steps = cfg.epochs * chunks_per_epoch
    step = 0
    for _ in range(cfg.epochs):
        if cfg.subsample > 0.0:
            kept = _subsample(sentences, vocab, cfg.subsample, rng)
            trimmed = [
                Sentence(uid=s.uid, tokens=tuple(toks), sentiment=s.sentiment)
                for s, toks in zip(sentences, kept)
                if toks
            ]
            pairs = skipgram_pairs(trimmed, vocab, cfg.window)
        else:
            pairs = base_pairs
        if pairs.shape[0] == 0:
            raise DataError("no skipgram training pairs (sentences too short?)")
        order = rng.permutation(pairs.shape[0])
        for start in range(0, len(order), cfg.batch_size):
            chunk = pairs[order[start:start + cfg.batch_size]]
            negs = rng.choice(v, size=(chunk.shape[0], cfg.negatives), p=probs)
            w_in.grad = None
            w_out.grad = None
            with Graph():
                loss = skipgram_loss(w_in, w_out, chunk[:, 0], chunk[:, 1], negs)
                backward(loss)
            w_in.grad[PAD_ID] = 0.0
            lr_t = cfg.lr * max(1e-4, 1.0 - step / total_steps)
            scale = lr_t * chunk.shape[0]
            for w in (w_in, w_out):
                g = scale * w.grad
                norm = np.linalg.norm(g)
                if norm > STEP_NORM_CAP:
                    g *= STEP_NORM_CAP / norm
                w.data -= g
            step += 1
    w_in.data[PAD_ID] = 0.0
    return Embeddings(vocab, w_in.data.copy())


def weighted_mean(rows, weights):
    """Sum_i weights[i]*rows[i] / sum_i weights[i]; plain mean if all zero."""
    rows = np.asarray(rows, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] != weights.shape[0]:
        raise UsageError(f"rows {rows.shape} and weights {weights.shape} disagree")
    total = weights.sum()
    if total == 0.0:
        return rows.mean(axis=0)
    return (weights[:, None] * rows).sum(axis=0) / total


def sentence_embedding(sentence, emb, tfidf):
    """tf-idf weighted average of the sentence's word vectors."""
    if not sentence.tokens:
        raise UsageError("cannot embed an empty sentence")
    ids = emb.vocab.encode(sentence.surfaces)
    weights = tfidf_weights(ids, tfidf)
    return weighted_mean(emb.vectors[ids], weights)
