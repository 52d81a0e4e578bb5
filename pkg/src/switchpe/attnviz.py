"""Attention inspection: dump post-softmax weights for one sentence as CSV
(one file per layer and head, token surfaces as headers) and a hand-rolled
SVG heatmap with language-switch positions highlighted.
"""

from __future__ import annotations

import csv
import os

import numpy as np

from .errors import UsageError
from .switchpoints import detect_switch_points, effective_tags
from .tensor import no_grad

CELL = 26          # heatmap cell size in px
LABEL_SPACE = 86   # room for token labels on each axis


def attention_matrices(model, sentence):
    """Post-softmax attention for one sentence: list over layers of
    (heads, T, T) arrays."""
    if not sentence.tokens:
        raise UsageError("cannot inspect an empty sentence")
    if not model.layers:
        raise UsageError("model has zero encoder layers, nothing to inspect")
    batch = model.make_batch([sentence])
    collected = []
    with no_grad():
        model.encode(batch, collect_attention=collected)
    return [mat[0] for mat in collected]


def switch_positions(sentence):
    tags = effective_tags(sentence.tags)
    return sorted(p.position for p in detect_switch_points(tags))


def export_attention(model, sentence, out_dir, prefix="attention"):
    """Write attention CSVs and SVGs for every layer and head.

    Returns the list of written file paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    matrices = attention_matrices(model, sentence)
    surfaces = sentence.surfaces
    sps = set(switch_positions(sentence))
    paths = []
    for layer_idx, per_layer in enumerate(matrices):
        for head_idx in range(per_layer.shape[0]):
            weights = per_layer[head_idx]
            stem = f"{prefix}_layer{layer_idx}_head{head_idx}"
            csv_path = os.path.join(out_dir, stem + ".csv")
            _write_matrix_csv(csv_path, weights, surfaces)
            svg_path = os.path.join(out_dir, stem + ".svg")
            with open(svg_path, "w", encoding="utf-8") as fh:
                fh.write(render_heatmap_svg(
                    weights, surfaces, sps,
                    title=f"layer {layer_idx} head {head_idx}"))
            paths.extend([csv_path, svg_path])
    return paths


def _write_matrix_csv(path, weights, surfaces):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query\\key"] + list(surfaces))
        for i, row in enumerate(weights):
            writer.writerow([surfaces[i]] + [repr(float(v)) for v in row])


def _esc(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def render_heatmap_svg(weights, surfaces, switch_set, title=""):
    """Grayscale heatmap (white 0, black 1) with token labels on both axes.

    Tokens at switch positions are drawn in red with an asterisk so the
    relation between high-attention cells and switches is visible at a
    glance.
    """
    weights = np.asarray(weights, dtype=np.float64)
    t = weights.shape[0]
    width = LABEL_SPACE + CELL * t + 10
    height = LABEL_SPACE + CELL * t + 28
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{LABEL_SPACE}" y="16" font-family="monospace" '
        f'font-size="12" fill="#000">{_esc(title)}</text>',
    ]
    for i in range(t):
        for j in range(t):
            v = min(max(float(weights[i, j]), 0.0), 1.0)
            shade = int(round(255 * (1.0 - v)))
            fill = f"rgb({shade},{shade},{shade})"
            x = LABEL_SPACE + j * CELL
            y = LABEL_SPACE + i * CELL
            parts.append(
                f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                f'fill="{fill}" stroke="#ddd" stroke-width="0.5"/>')
    for idx, surface in enumerate(surfaces):
        starred = f"{surface}*" if idx in switch_set else surface
        color = "#c00000" if idx in switch_set else "#000"
        y_row = LABEL_SPACE + idx * CELL + CELL // 2 + 4
        parts.append(
            f'<text x="{LABEL_SPACE - 6}" y="{y_row}" text-anchor="end" '
            f'font-family="monospace" font-size="11" fill="{color}">'
            f'{_esc(starred)}</text>')
        x_col = LABEL_SPACE + idx * CELL + CELL // 2
        parts.append(
            f'<text x="{x_col}" y="{LABEL_SPACE - 6}" text-anchor="start" '
            f'font-family="monospace" font-size="11" fill="{color}" '
            f'transform="rotate(-55 {x_col} {LABEL_SPACE - 6})">'
            f'{_esc(starred)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
