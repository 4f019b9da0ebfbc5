"""Exact O(N^2) t-SNE for qualitative inspection of sentence embeddings.

Pairwise affinities use a per-point Gaussian bandwidth found by binary
search so every row of the conditional distribution hits the requested
perplexity; the symmetrized joint matrix P then drives plain momentum
gradient descent on KL(P || Q) against a Student-t Q, with early
exaggeration for the first 250 iterations.

Internally points are processed in a canonical order (rows sorted
lexicographically) and each point's initial coordinates are drawn from a
stream seeded by (seed, canonical index). Every float therefore gets
computed identically no matter how the caller ordered the input, which
makes the layout exactly equivariant to row permutation for distinct rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable
from xml.sax.saxutils import escape

import numpy as np

from .errors import ValidationError

_PERPLEXITY_TOL_BITS = 1e-3
_MAX_SEARCH_STEPS = 200
_EXAGGERATION_STEPS = 250
_Q_FLOOR = 1e-12

# Okabe-Ito palette first (colorblind-safe), then four extra hues.
PALETTE = (
    "#0072B2", "#E69F00", "#009E73", "#D55E00", "#CC79A7",
    "#56B4E9", "#F0E442", "#000000", "#6A3D9A", "#999999",
    "#B15928", "#66C2A5",
)


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.perplexity > 1.0:
            raise ValidationError(f"perplexity must be > 1, got {self.perplexity}")
        if self.iterations < 1:
            raise ValidationError(f"iterations must be >= 1, got {self.iterations}")
        if self.learning_rate <= 0.0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.early_exaggeration < 1.0:
            raise ValidationError(
                f"early_exaggeration must be >= 1, got {self.early_exaggeration}"
            )
        if self.seed < 0:
            raise ValidationError(f"seed must be non-negative, got {self.seed}")


@dataclass
class Layout2D:
    """A 2-D arrangement of points with integer class labels."""

    points: np.ndarray
    labels: list[int]

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValidationError(f"points must be N x 2, got shape {self.points.shape}")
        if not np.isfinite(self.points).all():
            raise ValidationError("layout contains non-finite coordinates")
        if len(self.labels) != self.points.shape[0]:
            raise ValidationError(
                f"{len(self.labels)} labels for {self.points.shape[0]} points"
            )
        if any(not isinstance(l, int) or l < 0 for l in self.labels):
            raise ValidationError("labels must be non-negative integers")


def _squared_distances(x: np.ndarray) -> np.ndarray:
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _check_input(x, min_points: int = 3) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"input must be 2-D, got shape {x.shape}")
    if x.shape[0] < min_points:
        raise ValidationError(f"need at least {min_points} points, got {x.shape[0]}")
    if not np.isfinite(x).all():
        raise ValidationError("input contains non-finite values")
    return x


def joint_probabilities(x, perplexity: float) -> np.ndarray:
    """Symmetrized t-SNE affinities P for the rows of x.

    Each row's Gaussian bandwidth comes from a binary search that stops
    when the realized perplexity is within 1e-3 of the target in the log2
    domain (or after 200 halvings). The conditional matrix is symmetrized
    as (P + P^T) / (2N), so the result is symmetric, non-negative, zero on
    the diagonal, and sums to one.
    """
    x = _check_input(x)
    n = x.shape[0]
    if not 1.0 < perplexity <= n - 1:
        raise ValidationError(
            f"perplexity {perplexity} is infeasible for {n} points "
            f"(must be in (1, {n - 1}])"
        )
    target_bits = math.log2(perplexity)
    d2 = _squared_distances(x)
    conditional = np.zeros((n, n), dtype=np.float64)
    others = ~np.eye(n, dtype=bool)
    for i in range(n):
        row_d2 = d2[i][others[i]]
        shifted = row_d2 - row_d2.min()
        beta, lo, hi = 1.0, 0.0, math.inf
        for _ in range(_MAX_SEARCH_STEPS):
            w = np.exp(-shifted * beta)
            p = w / w.sum()
            nonzero = p[p > 0.0]
            entropy_bits = float(-(nonzero * np.log2(nonzero)).sum())
            if abs(entropy_bits - target_bits) <= _PERPLEXITY_TOL_BITS:
                break
            if entropy_bits > target_bits:
                lo = beta
                beta = beta * 2.0 if hi == math.inf else (lo + hi) / 2.0
            else:
                hi = beta
                beta = beta / 2.0 if lo == 0.0 else (lo + hi) / 2.0
        conditional[i][others[i]] = p
    return (conditional + conditional.T) / (2.0 * n)


def _student_t_weights(layout: np.ndarray) -> np.ndarray:
    w = 1.0 / (1.0 + _squared_distances(layout))
    np.fill_diagonal(w, 0.0)
    return w


def kl_divergence(p: np.ndarray, layout: np.ndarray) -> float:
    """KL(P || Q) in nats, where Q is the Student-t distribution of layout."""
    w = _student_t_weights(np.asarray(layout, dtype=np.float64))
    q = np.maximum(w / w.sum(), _Q_FLOOR)
    mask = p > 0.0
    return float((p[mask] * np.log(p[mask] / q[mask])).sum())


def run_tsne(
    x,
    config: TsneConfig,
    on_iteration: Callable[[int, np.ndarray], None] | None = None,
) -> np.ndarray:
    """Project rows of x to 2-D; returns an N x 2 layout in input order.

    Points start at seeded Gaussian noise (std 1e-4) and follow momentum
    gradient descent (0.5, then 0.8 after iteration 250) on KL(P || Q),
    with P multiplied by the early-exaggeration factor during the first
    250 iterations. When given, on_iteration is called after every update
    with the 0-based iteration index and a copy of the current layout.
    """
    x = _check_input(x)
    n = x.shape[0]
    if not config.perplexity < (n - 1) / 3.0:
        raise ValidationError(
            f"perplexity {config.perplexity} too large for {n} points "
            f"(needs perplexity < (N - 1) / 3 = {(n - 1) / 3.0:.2f})"
        )

    # Canonical processing order: identical floats no matter the row order.
    order = np.lexsort(tuple(x[:, j] for j in reversed(range(x.shape[1]))))
    xs = x[order]
    p = joint_probabilities(xs, config.perplexity)

    ys = np.empty((n, 2), dtype=np.float64)
    for i in range(n):
        ys[i] = np.random.default_rng((config.seed, i)).normal(0.0, 1e-4, size=2)
    velocity = np.zeros_like(ys)

    def emit(iteration: int) -> None:
        if on_iteration is not None:
            unsorted = np.empty_like(ys)
            unsorted[order] = ys
            on_iteration(iteration, unsorted)

    for iteration in range(config.iterations):
        exaggerating = iteration < _EXAGGERATION_STEPS
        p_used = p * config.early_exaggeration if exaggerating else p
        momentum = 0.5 if exaggerating else 0.8

        w = _student_t_weights(ys)
        q = w / w.sum()
        m = (p_used - q) * w
        grad = 4.0 * (m.sum(axis=1)[:, None] * ys - m @ ys)
        if not np.isfinite(grad).all():
            raise ValidationError(
                f"non-finite t-SNE gradient at iteration {iteration}; "
                "try a smaller learning rate"
            )
        velocity = momentum * velocity - config.learning_rate * grad
        ys = ys + velocity
        emit(iteration)

    out = np.empty_like(ys)
    out[order] = ys
    return out


def _scale_to_box(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    vmin, vmax = values.min(), values.max()
    span = vmax - vmin
    if span == 0.0:
        return np.full_like(values, (lo + hi) / 2.0)
    return lo + (values - vmin) / span * (hi - lo)


def render_scatter(layout: Layout2D, label_names: list[str], path: str | Path) -> None:
    """Write the layout as a standalone SVG scatter plot with a legend."""
    n_classes = len(label_names)
    if n_classes < 1:
        raise ValidationError("label_names must not be empty")
    if n_classes > len(PALETTE):
        raise ValidationError(
            f"{n_classes} classes exceed the {len(PALETTE)}-color palette"
        )
    bad = [l for l in layout.labels if l >= n_classes]
    if bad:
        raise ValidationError(
            f"label id {bad[0]} has no name (only {n_classes} names given)"
        )

    width, height, margin, legend_w = 760, 600, 40.0, 170
    plot_right = width - legend_w - margin
    xs = _scale_to_box(layout.points[:, 0], margin, plot_right)
    # SVG y grows downward; flip so larger coordinates plot higher.
    ys = height - margin - _scale_to_box(layout.points[:, 1], 0.0, height - 2 * margin)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for (px, py), label in zip(zip(xs, ys), layout.labels):
        lines.append(
            f'<circle cx="{px:.2f}" cy="{py:.2f}" r="4" fill="{PALETTE[label]}" '
            f'fill-opacity="0.8"/>'
        )
    legend_x = plot_right + 30
    for cls, name in enumerate(label_names):
        ly = margin + 24 * cls
        lines.append(
            f'<rect x="{legend_x}" y="{ly}" width="14" height="14" fill="{PALETTE[cls]}"/>'
        )
        lines.append(
            f'<text x="{legend_x + 20}" y="{ly + 12}" font-family="sans-serif" '
            f'font-size="14">{escape(name)}</text>'
        )
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
