"""Margin-reproduction metrics and embedding scatter plots.

evaluate() quantifies how well a trained manifold realizes its prescribed
geometry: distances between learned state means versus the margin matrix
(normalized stress), within-state spread, and nearest-mean accuracy on a
held-out set.  render_scatter_svg() draws the 2-D embedding space as a
standalone, textually diffable SVG.
"""

from __future__ import annotations

import numpy as np

from dataclasses import dataclass

from .errors import InsufficientDataError, UnsupportedDimensionError
from .inference import mean_embeddings_by_state
from .network import forward

__all__ = [
    "EvalReport",
    "evaluate",
    "train_test_split",
    "margin_stress",
    "render_scatter_svg",
    "PALETTE",
]

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
)


@dataclass
class EvalReport:
    """How faithfully the learned space realizes the prescribed margins."""

    realized_margins: np.ndarray
    margin_stress: float
    intra_state_spread: np.ndarray
    accuracy: float

    def to_dict(self):
        return {
            "realized_margins": self.realized_margins.tolist(),
            "margin_stress": self.margin_stress,
            "intra_state_spread": self.intra_state_spread.tolist(),
            "accuracy": self.accuracy,
        }


def margin_stress(realized, margins):
    """Normalized RMS mismatch: sqrt(sum (r_ij - m_ij)^2 / sum m_ij^2), i<j.

    Scale-aware on purpose: the loss pins absolute distances, so doubling
    every embedding with unchanged margins must change the stress.
    """
    m = margins.entries
    iu = np.triu_indices(m.shape[0], 1)
    denom = float((m[iu] ** 2).sum())
    if denom == 0.0:
        return 0.0
    return float(np.sqrt(((realized[iu] - m[iu]) ** 2).sum() / denom))


def evaluate(model, test_dataset):
    """Score a trained manifold on a test set covering all its states.

    Realized margins are the distances between per-state means of the test
    embeddings; accuracy is the nearest-mean rule against the model's stored
    (training) state means.
    """
    spec = model.spec
    if test_dataset.dim != spec.input_dim:
        raise ValueError(
            f"dataset width {test_dataset.dim} != manifold input_dim {spec.input_dim}"
        )
    s = len(spec.states)
    if test_dataset.state_count != s or np.any(test_dataset.state_counts() < 1):
        raise InsufficientDataError("test set must cover every state of the manifold")

    emb, _ = forward(model.network, test_dataset.signals, mode="eval")
    labels = test_dataset.state_labels
    means = mean_embeddings_by_state(emb, labels, s)

    diff = means[:, None, :] - means[None, :, :]
    realized = np.sqrt((diff ** 2).sum(axis=-1))
    np.fill_diagonal(realized, 0.0)

    spread = np.zeros(s)
    for i in range(s):
        rows = emb[labels == i]
        spread[i] = float(np.sqrt(((rows - means[i]) ** 2).sum(axis=1)).mean())

    to_means = emb[:, None, :] - model.state_means[None, :, :]
    predictions = np.argmin((to_means ** 2).sum(axis=-1), axis=1)
    accuracy = float((predictions == labels).mean())

    return EvalReport(realized, margin_stress(realized, spec.margins), spread, accuracy)


def train_test_split(dataset, test_fraction=0.2, seed=0):
    """Deterministic stratified split; every state lands in both parts."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for idx in dataset.state_indices():
        perm = idx[rng.permutation(idx.size)]
        n_test = max(1, int(round(test_fraction * idx.size)))
        if n_test >= idx.size:
            n_test = idx.size - 1
        test_idx.append(perm[:n_test])
        train_idx.append(perm[n_test:])
    return (
        dataset.subset(np.sort(np.concatenate(train_idx))),
        dataset.subset(np.sort(np.concatenate(test_idx))),
    )


def _svg_coords(points, width, height, pad):
    """Map data points to pixel coordinates with equal axis scaling."""
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = hi - lo
    scale_x = (width - 2 * pad) / span[0] if span[0] > 0 else np.inf
    scale_y = (height - 2 * pad) / span[1] if span[1] > 0 else np.inf
    scale = min(scale_x, scale_y)
    if not np.isfinite(scale):  # single point or fully degenerate extent
        scale = 1.0
    center = (lo + hi) / 2.0
    xs = width / 2.0 + (points[:, 0] - center[0]) * scale
    ys = height / 2.0 - (points[:, 1] - center[1]) * scale
    return xs, ys


def render_scatter_svg(embeddings, labels, state_names, out_path,
                       width=640, height=480):
    """Write a standalone SVG scatter of a 2-D embedding space.

    One circle per sample colored by state, a cross at each state's mean,
    and a legend of state names.  Only embedding dimension 2 is supported
    (higher-dimensional spaces have no canonical flat picture).
    """
    emb = np.asarray(embeddings, dtype=float)
    if emb.size == 0:
        emb = emb.reshape(0, 2)
    if emb.ndim != 2 or emb.shape[1] != 2:
        raise UnsupportedDimensionError(
            f"scatter plots need embedding dimension 2, got shape {emb.shape}"
        )
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (emb.shape[0],):
        raise ValueError("need one state label per embedding")
    if labels.size and (labels.min() < 0 or labels.max() >= len(state_names)):
        raise ValueError("labels must index into state_names")

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]

    if emb.shape[0]:
        means = mean_embeddings_by_state(emb, labels, len(state_names))
        have_mean = ~np.isnan(means[:, 0])
        everything = np.vstack([emb, means[have_mean]])
        xs, ys = _svg_coords(everything, width, height, pad=40)
        exs, eys = xs[:emb.shape[0]], ys[:emb.shape[0]]
        for j in range(emb.shape[0]):
            color = PALETTE[labels[j] % len(PALETTE)]
            lines.append(
                f'<circle class="sample" cx="{exs[j]:.2f}" cy="{eys[j]:.2f}" '
                f'r="3" fill="{color}" fill-opacity="0.5"/>'
            )
        mxs, mys = xs[emb.shape[0]:], ys[emb.shape[0]:]
        for k, state in enumerate(np.flatnonzero(have_mean)):
            color = PALETTE[state % len(PALETTE)]
            x, y = mxs[k], mys[k]
            lines.append(
                f'<path class="state-mean" d="M {x - 6:.2f} {y:.2f} L {x + 6:.2f} '
                f'{y:.2f} M {x:.2f} {y - 6:.2f} L {x:.2f} {y + 6:.2f}" '
                f'stroke="{color}" stroke-width="2.5" fill="none"/>'
            )

    lines.append('<g class="legend">')
    for i, name in enumerate(state_names):
        color = PALETTE[i % len(PALETTE)]
        y = 18 + 18 * i
        lines.append(
            f'<g class="legend-entry"><rect x="{width - 150}" y="{y}" width="12" '
            f'height="12" fill="{color}"/><text x="{width - 132}" y="{y + 10}" '
            f'font-family="sans-serif" font-size="12">{name}</text></g>'
        )
    lines.append('</g>')
    lines.append('</svg>')

    with open(out_path, "w") as f:
        f.write("\n".join(lines) + "\n")
