"""Command-line interface.

Subcommands: train, eval, ablate, spi, attn, synth. Every subcommand takes
``--config <json file>`` plus any number of ``--set key=value`` overrides
(values parse as JSON, falling back to plain strings), writes its resolved
configuration alongside its outputs, and exits 0 on success or 1 with a
single machine-readable error line on stderr.
"""

from __future__ import annotations

import argparse
import collections
import csv
import json
import os
import sys

from .ablation import REFERENCE_F1_PCT, format_table, run_ablation
from .attnviz import export_attention
from .corpus import Sentence, Token, normalize_tag, serialize_corpus
from .errors import ConfigError, SwitchPEError
from .model import load_checkpoint
from .switchpoints import SPIVariant, clamp_spi, detect_switch_points, effective_tags, spi
from .training import (
    config_from_dict,
    evaluate_model,
    load_dataset,
    pick_split,
    resolve_splits,
    train_run,
)


def _parse_override(item):
    key, sep, raw = item.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override '{item}' is not KEY=VALUE")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def resolve_config(config_path, overrides):
    values = {}
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {config_path} must hold a JSON object")
        values.update(loaded)
    for item in overrides:
        key, value = _parse_override(item)
        values[key] = value
    return config_from_dict(values)


def _echo_config(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "config.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cfg.to_json())
    print(f"config: {path}")


def _parse_int_list(text):
    try:
        return [int(x) for x in str(text).split(",") if x.strip() != ""]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got '{text}'") from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_train(args):
    cfg = resolve_config(args.config, args.overrides)
    summary = train_run(cfg)
    print(f"config: {os.path.join(cfg.out_dir, 'config.json')}")
    for key in sorted(summary):
        print(f"{key}: {summary[key]}")
    return 0


def _cmd_eval(args):
    cfg = resolve_config(args.config, args.overrides)
    _echo_config(cfg)
    model, _ = load_checkpoint(args.ckpt)
    data = pick_split(resolve_splits(cfg), cfg.eval_split)
    report = evaluate_model(model, data, cfg.batch_size)
    json_path = os.path.join(cfg.out_dir, "metrics.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    with open(os.path.join(cfg.out_dir, "metrics.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    print(report.to_text(), end="")
    print(f"metrics: {json_path}")
    return 0


def _cmd_ablate(args):
    cfg = resolve_config(args.config, args.overrides)
    _echo_config(cfg)
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    heads_list = _parse_int_list(args.heads) if args.heads else [cfg.heads]
    seeds = _parse_int_list(args.seeds)
    rows = run_ablation(cfg, schemes, heads_list, seeds, workers=args.workers)
    print(format_table(rows), end="")
    print(f"summary: {os.path.join(cfg.out_dir, 'summary.csv')}")
    return 0


def _cmd_spi(args):
    cfg = resolve_config(args.config, args.overrides)
    _echo_config(cfg)
    sentences = load_dataset(cfg)
    variant = SPIVariant(cfg.spi_variant)
    csv_path = os.path.join(cfg.out_dir, "spi.csv")
    sp_counts = collections.Counter()
    total_len = 0
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["uid", "position", "surface", "tag", "spi"])
        for s in sentences:
            vec = clamp_spi(spi(s.tags, variant), cfg.p_max)
            tags = effective_tags(s.tags)
            sp_counts[len(detect_switch_points(tags))] += 1
            total_len += len(s.tokens)
            for pos, (token, idx) in enumerate(zip(s.tokens, vec.indices)):
                writer.writerow([s.uid, pos, token.surface, token.tag, idx])
    mean_len = total_len / len(sentences) if sentences else 0.0
    lines = [
        f"sentences: {len(sentences)}",
        f"variant: {variant.value}",
        f"mean_sentence_length: {mean_len:.3f}",
        "switch_point_histogram (count: sentences):",
    ]
    for k in sorted(sp_counts):
        lines.append(f"  {k}: {sp_counts[k]}")
    summary = "\n".join(lines) + "\n"
    with open(os.path.join(cfg.out_dir, "spi_summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(summary)
    print(summary, end="")
    print(f"spi: {csv_path}")
    return 0


def _sentence_from_tokens(text):
    tokens = []
    for item in text.split():
        surface, sep, tag = item.rpartition("/")
        if not sep or not surface:
            raise ConfigError(
                f"token '{item}' is not SURFACE/TAG (for example ghar/HI)")
        tokens.append(Token(surface=surface, tag=normalize_tag(tag)))
    if not tokens:
        raise ConfigError("--tokens produced no tokens")
    return Sentence(uid="cli", tokens=tuple(tokens), sentiment="neutral")


def _cmd_attn(args):
    cfg = resolve_config(args.config, args.overrides)
    _echo_config(cfg)
    model, _ = load_checkpoint(args.ckpt)
    if args.tokens:
        sentence = _sentence_from_tokens(args.tokens)
    else:
        data = load_dataset(cfg)
        if not 0 <= args.index < len(data):
            raise ConfigError(
                f"--index {args.index} out of range for {len(data)} sentences")
        sentence = data[args.index]
    paths = export_attention(model, sentence, cfg.out_dir)
    for p in paths:
        print(f"wrote: {p}")
    return 0


def _cmd_synth(args):
    cfg = resolve_config(args.config, args.overrides)
    _echo_config(cfg)
    from .corpus import generate_synthetic

    sentences = generate_synthetic(cfg.synth_config(), seed=cfg.seed)
    out_path = args.out or os.path.join(cfg.out_dir, "synthetic.tsv")
    serialize_corpus(sentences, out_path)
    counts = collections.Counter(s.sentiment for s in sentences)
    print(f"wrote {len(sentences)} sentences to {out_path}")
    for label in sorted(counts):
        print(f"  {label}: {counts[label]}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="switchpe",
        description="Train and inspect switching-point aware sentiment models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--set", action="append", default=[], dest="overrides",
                       metavar="KEY=VALUE", help="override a config key")

    p_train = sub.add_parser("train", help="train a model end to end")
    common(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    common(p_eval)
    p_eval.add_argument("--ckpt", required=True, help="checkpoint path")
    p_eval.set_defaults(func=_cmd_eval)

    p_abl = sub.add_parser("ablate", help="run the scheme comparison grid")
    common(p_abl)
    p_abl.add_argument("--schemes", default=",".join(REFERENCE_F1_PCT),
                       help="comma-separated scheme names")
    p_abl.add_argument("--heads", default="", help="comma-separated head counts")
    p_abl.add_argument("--seeds", default="0", help="comma-separated seeds")
    p_abl.add_argument("--workers", type=int, default=1,
                       help="parallel worker processes")
    p_abl.set_defaults(func=_cmd_ablate)

    p_spi = sub.add_parser("spi", help="emit switching-point indices for a corpus")
    common(p_spi)
    p_spi.set_defaults(func=_cmd_spi)

    p_attn = sub.add_parser("attn", help="export attention heatmaps")
    common(p_attn)
    p_attn.add_argument("--ckpt", required=True, help="checkpoint path")
    p_attn.add_argument("--tokens", default="",
                        help="sentence as SURFACE/TAG pairs, space separated")
    p_attn.add_argument("--index", type=int, default=0,
                        help="sentence index into the configured dataset")
    p_attn.set_defaults(func=_cmd_attn)

    p_synth = sub.add_parser("synth", help="write a synthetic corpus")
    common(p_synth)
    p_synth.add_argument("--out", default="", help="output corpus path")
    p_synth.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SwitchPEError as exc:
        line = json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}, sort_keys=True)
        print(line, file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        line = json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}, sort_keys=True)
        print(line, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
