"""Scheme-comparison grid: trains every (scheme, head count) cell across
seeds and aggregates held-out weighted F1 into CSV plus an aligned table.

Cells are fully independent (own seed, own model, own output subdirectory)
so they can run as parallel worker processes.
"""

from __future__ import annotations

import csv
import multiprocessing
import os
import statistics
from dataclasses import replace

from .errors import ConfigError
from .posenc import parse_scheme
from .training import train_run

# Feature flags per scheme for the comparison table: does the scheme add
# fixed sin/cos rows, a learned position table, switching-point indexing,
# and/or per-offset relative key embeddings?
SCHEME_FLAGS = {
    "SINUSOIDAL": (True, False, False, False),
    "DYNAMIC": (False, True, False, False),
    "RELATIVE": (False, False, False, True),
    "SP_DYNAMIC": (False, True, True, False),
    "SP_DYNAMIC_RELATIVE": (False, True, True, True),
}

# Reported weighted F1 (percent) for each scheme on the SentiMix 2020
# Hinglish benchmark, carried as an annotation column for orientation.
# Desk-scale runs on synthetic data are not expected to reproduce them.
REFERENCE_F1_PCT = {
    "SINUSOIDAL": 65.0,
    "DYNAMIC": 69.7,
    "RELATIVE": 73.4,
    "SP_DYNAMIC": 73.52,
    "SP_DYNAMIC_RELATIVE": 75.56,
}


def _cell_configs(base, schemes, heads_list, seeds):
    cfgs = []
    for scheme in schemes:
        parse_scheme(scheme)
        for heads in heads_list:
            for seed in seeds:
                sub = os.path.join(base.out_dir, f"{scheme}_h{heads}_seed{seed}")
                cfgs.append(replace(
                    base, pe_scheme=scheme, heads=heads, seed=seed, out_dir=sub))
    return cfgs


def run_ablation(base, schemes, heads_list, seeds, workers=1):
    """Train the full grid and write runs.csv, summary.csv, table.txt.

    Returns the summary rows (one dict per (scheme, heads) cell, in the
    order the schemes were given).
    """
    if not schemes or not seeds or not heads_list:
        raise ConfigError("need at least one scheme, one head count, and one seed")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    os.makedirs(base.out_dir, exist_ok=True)
    cfgs = _cell_configs(base, schemes, heads_list, seeds)

    if workers > 1:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(workers) as pool:
            summaries = pool.map(train_run, cfgs)
    else:
        summaries = [train_run(cfg) for cfg in cfgs]

    by_cell = {}
    run_rows = []
    for cfg, summary in zip(cfgs, summaries):
        f1 = summary["eval_weighted_f1"]
        run_rows.append({
            "scheme": cfg.pe_scheme,
            "heads": cfg.heads,
            "seed": cfg.seed,
            "weighted_f1": f1,
            "accuracy": summary["eval_accuracy"],
        })
        by_cell.setdefault((cfg.pe_scheme, cfg.heads), []).append(f1)

    summary_rows = []
    for scheme in schemes:
        for heads in heads_list:
            scores = by_cell[(scheme, heads)]
            summary_rows.append({
                "scheme": scheme,
                "heads": heads,
                "n_seeds": len(scores),
                "median_weighted_f1": statistics.median(scores),
                "min_weighted_f1": min(scores),
                "max_weighted_f1": max(scores),
                "reference_f1_pct": REFERENCE_F1_PCT.get(scheme, ""),
            })

    _write_csv(os.path.join(base.out_dir, "runs.csv"), run_rows)
    _write_csv(os.path.join(base.out_dir, "summary.csv"), summary_rows)
    table = format_table(summary_rows)
    with open(os.path.join(base.out_dir, "table.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    return summary_rows


def _write_csv(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def format_table(summary_rows):
    """Aligned text table: scheme, feature flags, heads, F1 stats, reference."""
    header = (f"{'scheme':<22} {'sin/cos':>7} {'index':>5} {'spi':>3} {'rel':>3} "
              f"{'heads':>5} {'median F1%':>10} {'range':>17} {'reported':>8}")
    lines = [header, "-" * len(header)]
    for row in summary_rows:
        sincos, index, spi_flag, rel = SCHEME_FLAGS[row["scheme"]]
        mark = lambda b: "x" if b else "-"
        lo, hi = 100 * row["min_weighted_f1"], 100 * row["max_weighted_f1"]
        ref = row["reference_f1_pct"]
        lines.append(
            f"{row['scheme']:<22} {mark(sincos):>7} {mark(index):>5} "
            f"{mark(spi_flag):>3} {mark(rel):>3} {row['heads']:>5d} "
            f"{100 * row['median_weighted_f1']:>10.2f} "
            f"{f'[{lo:.2f}, {hi:.2f}]':>17} "
            f"{ref if ref == '' else f'{ref:.2f}':>8}"
        )
    return "\n".join(lines) + "\n"
