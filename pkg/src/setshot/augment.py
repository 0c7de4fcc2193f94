"""Stochastic graph augmentations: edge dropping and feature-column masking.

Both take an explicit numpy Generator so a run is reproducible from one
parent seed; the training loop derives per-epoch, per-view substreams.
Ratios are capped at 0.4, the upper end of the searched range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .rngs import AUGMENT_STREAM, substream

MAX_RATIO = 0.4


@dataclass
class AugmentConfig:
    edge_drop_ratio: float = 0.2
    feature_mask_ratio: float = 0.2
    seed: int = 0

    def __post_init__(self):
        _check_ratio(self.edge_drop_ratio)
        _check_ratio(self.feature_mask_ratio)


def _check_ratio(ratio: float) -> None:
    if not 0.0 <= ratio <= MAX_RATIO:
        raise ValueError(f"augmentation ratio {ratio} outside [0, {MAX_RATIO}]")


def _round_half_even(x: float) -> int:
    # Documented rounding so removal counts are testable.
    return int(round(x))


def drop_edges(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """Remove exactly round(ratio * m) edges uniformly without replacement."""
    _check_ratio(ratio)
    k = _round_half_even(ratio * g.m)
    if k == 0:
        kept = g.edges
    else:
        removed = rng.choice(g.m, size=k, replace=False)
        mask = np.ones(g.m, dtype=bool)
        mask[removed] = False
        kept = g.edges[mask]
    return Graph(g.n, kept, g.X, labels=g.labels, name=g.name)


def mask_features(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """Zero round(ratio * d) whole feature columns, chosen uniformly."""
    _check_ratio(ratio)
    k = _round_half_even(ratio * g.d)
    if k == 0:
        X = g.X
    else:
        cols = rng.choice(g.d, size=k, replace=False)
        X = g.X.copy()
        X[:, cols] = 0.0
    return Graph(g.n, g.edges, X, labels=g.labels, name=g.name)


def two_views(g: Graph, cfg: AugmentConfig, epoch: int) -> tuple[Graph, Graph]:
    """Independent augmented views from substreams keyed by (epoch, view)."""
    views = []
    for view in (0, 1):
        rng = substream(cfg.seed, AUGMENT_STREAM, epoch, view)
        h = drop_edges(g, cfg.edge_drop_ratio, rng)
        h = mask_features(h, cfg.feature_mask_ratio, rng)
        views.append(h)
    return views[0], views[1]
