"""Run orchestration: data resolution, two-stage training (word vectors,
then classifier), per-epoch logging, best-checkpoint retention, evaluation.

Every run owns an output directory and writes its resolved configuration
there before doing anything else, so results are always reproducible from
the artifacts alone. All randomness derives from the single run seed:
data generation and splitting use seed, the word-vector stage seed + 1,
and the classifier loop (shuffling, dropout) seed + 2.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from .corpus import (
    MAX_LEN,
    PAD_ID,
    SynthConfig,
    build_tfidf,
    build_vocab,
    generate_synthetic,
    parse_corpus,
    split,
)
from .embeddings import SkipgramConfig, train_skipgram
from .errors import ConfigError, DataError
from .metrics import compute_metrics
from .model import Model, load_checkpoint, save_checkpoint
from .optim import Adam
from .tensor import Graph, backward, no_grad

LOG_HEADER = "epoch,train_loss,dev_loss,dev_weighted_f1"


@dataclass
class RunConfig:
    """Flat, JSON-serializable settings for one training/evaluation run."""

    # model architecture
    dim: int = 120
    heads: int = 12
    layers: int = 2
    pe_scheme: str = "SINUSOIDAL"
    spi_variant: str = "reset_all"
    rel_k: int = 8
    p_max: int = 64
    cnn_filters: int = 64
    cnn_kernel: int = 3
    ffn_dim: int = 0
    use_layer_norm: bool = True
    use_ffn: bool = True
    dropout: float = 0.1
    attn_window: int = 0
    finetune_embeddings: bool = False

    # data: a corpus file, or the synthetic generator when data_path is empty
    data_path: str = ""
    max_len: int = MAX_LEN
    synth_n: int = 300
    synth_hi_vocab: int = 40
    synth_en_vocab: int = 40
    synth_shared_vocab: int = 60
    synth_shared_frac: float = 0.5
    synth_mean_len: int = 12
    synth_len_spread: int = 3
    synth_switch_prob: float = 0.3
    synth_label_rule: str = "sp_determined"
    synth_sp_run_threshold: int = 5

    # splits
    train_frac: float = 0.8
    dev_frac: float = 0.1
    test_frac: float = 0.1
    eval_split: str = "test"  # train | dev | test | all

    # word-vector stage
    w2v_window: int = 3
    w2v_negatives: int = 5
    w2v_epochs: int = 5
    w2v_lr: float = 0.025
    w2v_subsample: float = 0.0
    w2v_batch_size: int = 256

    # classifier stage
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 20

    seed: int = 0
    out_dir: str = "runs/latest"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.eval_split not in ("train", "dev", "test", "all"):
            raise ConfigError(f"unknown eval_split '{self.eval_split}'")
        self.model_config()  # architecture validation

    def model_config(self):
        from .model import ModelConfig

        return ModelConfig(
            dim=self.dim, heads=self.heads, layers=self.layers,
            pe_scheme=self.pe_scheme, spi_variant=self.spi_variant,
            rel_k=self.rel_k, p_max=self.p_max,
            cnn_filters=self.cnn_filters, cnn_kernel=self.cnn_kernel,
            ffn_dim=self.ffn_dim, use_layer_norm=self.use_layer_norm,
            use_ffn=self.use_ffn, dropout=self.dropout,
            attn_window=self.attn_window,
            finetune_embeddings=self.finetune_embeddings, seed=self.seed,
        )

    def skipgram_config(self):
        return SkipgramConfig(
            window=self.w2v_window, negatives=self.w2v_negatives,
            epochs=self.w2v_epochs, lr=self.w2v_lr,
            subsample=self.w2v_subsample, dim=self.dim,
            batch_size=self.w2v_batch_size,
        )

    def synth_config(self):
        return SynthConfig(
            n_sentences=self.synth_n, hi_vocab=self.synth_hi_vocab,
            en_vocab=self.synth_en_vocab, shared_vocab=self.synth_shared_vocab,
            shared_frac=self.synth_shared_frac, mean_len=self.synth_mean_len,
            len_spread=self.synth_len_spread, switch_prob=self.synth_switch_prob,
            label_rule=self.synth_label_rule,
            sp_run_threshold=self.synth_sp_run_threshold,
        )

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def config_from_dict(values):
    """Build a RunConfig, rejecting unknown keys by name."""
    valid = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(values) - valid)
    if unknown:
        raise ConfigError(
            f"unknown config keys {unknown}; valid keys: {sorted(valid)}")
    return RunConfig(**values)


def load_dataset(cfg):
    if cfg.data_path:
        if not os.path.exists(cfg.data_path):
            raise DataError(f"data file not found: {cfg.data_path}")
        return parse_corpus(cfg.data_path, max_len=cfg.max_len)
    return generate_synthetic(cfg.synth_config(), seed=cfg.seed)


def resolve_splits(cfg):
    data = load_dataset(cfg)
    return split(data, (cfg.train_frac, cfg.dev_frac, cfg.test_frac), seed=cfg.seed)


def pick_split(splits, name):
    train, dev, test = splits
    if name == "train":
        return train
    if name == "dev":
        return dev
    if name == "test":
        return test
    return train + dev + test


def _batches(items, size):
    for start in range(0, len(items), size):
        yield items[start:start + size]


def evaluate_model(model, sentences, batch_size=32):
    """Deterministic inference over a sentence list -> MetricsReport."""
    if not sentences:
        raise DataError("cannot evaluate on zero sentences")
    y_true, y_pred = [], []
    for chunk in _batches(sentences, batch_size):
        preds = model.predict(chunk)
        y_pred.extend(int(p) for p in preds)
        y_true.extend(s.label for s in chunk)
    return compute_metrics(y_true, y_pred)


def _dev_pass(model, sentences, batch_size):
    total_loss, n = 0.0, 0
    y_true, y_pred = [], []
    with no_grad():
        for chunk in _batches(sentences, batch_size):
            batch = model.make_batch(chunk)
            total_loss += model.loss(batch, train=False).item() * len(chunk)
            probs = model.predict_proba(chunk)
            y_pred.extend(int(i) for i in probs.argmax(axis=1))
            y_true.extend(s.label for s in chunk)
            n += len(chunk)
    report = compute_metrics(y_true, y_pred)
    return total_loss / n, report.weighted_f1


def train_run(cfg):
    """Full two-stage run. Returns a summary dict of artifact paths/scores.

    Artifacts written under cfg.out_dir: config.json, training_log.csv,
    best.ckpt (highest dev weighted F1; the initialized model when
    epochs=0), metrics.json and metrics.txt for the eval split. When the
    dev split is empty, dev columns are computed on the training split so
    checkpoint selection stays well-defined.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "config.json"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_json())

    train_set, dev_set, test_set = resolve_splits(cfg)
    if not train_set:
        raise DataError("training split is empty; adjust fractions or data")
    dev_for_log = dev_set if dev_set else train_set

    vocab = build_vocab(train_set)
    tfidf = build_tfidf(train_set, vocab)
    word_vectors = train_skipgram(train_set, vocab, cfg.skipgram_config(), seed=cfg.seed + 1)

    model = Model(cfg.model_config(), vocab, tfidf, word_vectors=word_vectors.vectors)
    opt = Adam(model.named_params(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed + 2)

    ckpt_path = os.path.join(cfg.out_dir, "best.ckpt")
    log_path = os.path.join(cfg.out_dir, "training_log.csv")
    save_checkpoint(ckpt_path, model, extra_config=cfg.to_dict())
    best_f1 = -math.inf

    log_lines = [LOG_HEADER]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_set))
        epoch_loss = 0.0
        for step, chunk_ids in enumerate(_batches(list(order), cfg.batch_size)):
            chunk = [train_set[i] for i in chunk_ids]
            batch = model.make_batch(chunk)
            model.zero_grad()
            with Graph():
                loss = model.loss(batch, train=True, rng=rng)
                backward(loss)
            loss_val = loss.item()
            if not math.isfinite(loss_val):
                raise DataError(
                    f"non-finite training loss {loss_val} at epoch {epoch} "
                    f"step {step}; aborting")
            if model.embedding.grad is not None:
                model.embedding.grad[PAD_ID] = 0.0
            opt.step()
            epoch_loss += loss_val * len(chunk)
        train_loss = epoch_loss / len(train_set)
        dev_loss, dev_f1 = _dev_pass(model, dev_for_log, cfg.batch_size)
        log_lines.append(
            f"{epoch},{repr(float(train_loss))},{repr(float(dev_loss))},"
            f"{repr(float(dev_f1))}")
        if dev_f1 > best_f1:
            best_f1 = dev_f1
            save_checkpoint(ckpt_path, model, extra_config=cfg.to_dict())

    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(log_lines) + "\n")

    best_model, _ = load_checkpoint(ckpt_path)
    eval_set = pick_split((train_set, dev_set, test_set), cfg.eval_split)
    summary = {
        "out_dir": cfg.out_dir,
        "checkpoint": ckpt_path,
        "log": log_path,
        "epochs_run": cfg.epochs,
        "best_dev_weighted_f1": None if best_f1 == -math.inf else best_f1,
    }
    if eval_set:
        report = evaluate_model(best_model, eval_set, cfg.batch_size)
        metrics_json = os.path.join(cfg.out_dir, "metrics.json")
        with open(metrics_json, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
        with open(os.path.join(cfg.out_dir, "metrics.txt"), "w", encoding="utf-8") as fh:
            fh.write(report.to_text())
        summary["metrics_json"] = metrics_json
        summary["eval_split"] = cfg.eval_split
        summary["eval_accuracy"] = report.accuracy
        summary["eval_weighted_f1"] = report.weighted_f1
        summary["eval_macro_f1"] = report.macro_f1
    return summary


def train_accuracy(model, sentences, batch_size=32):
    """Convenience for capacity checks: accuracy on the given sentences."""
    report = evaluate_model(model, sentences, batch_size)
    return report.accuracy
