"""Class splits and N-way K-shot episode sampling for meta-testing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ClassSplit:
    """Disjoint class-id lists for the meta-train/val/test phases."""

    train_classes: list[int] = field(default_factory=list)
    val_classes: list[int] = field(default_factory=list)
    test_classes: list[int] = field(default_factory=list)

    def __post_init__(self):
        sections = [set(self.train_classes), set(self.val_classes),
                    set(self.test_classes)]
        total = sum(len(s) for s in sections)
        if len(set().union(*sections)) != total:
            raise ValueError("class split sections overlap")

    def section(self, name: str) -> list[int]:
        try:
            return {"train": self.train_classes, "val": self.val_classes,
                    "test": self.test_classes}[name]
        except KeyError:
            raise ValueError(f"unknown split section {name!r}") from None


@dataclass
class Episode:
    """One N-way K-shot task with Q query nodes per class."""

    n_way: int
    k_shot: int
    q_query: int
    support_ids: np.ndarray
    support_labels: np.ndarray
    query_ids: np.ndarray
    query_labels: np.ndarray
    classes: np.ndarray        # the N sampled class ids, in sampling order

    def __post_init__(self):
        if np.intersect1d(self.support_ids, self.query_ids).size:
            raise ValueError("support and query nodes overlap")


def sample_episode(labels: np.ndarray, class_ids, n_way: int, k_shot: int,
                   q_query: int, rng: np.random.Generator) -> Episode:
    """Sample N classes, then K support + Q query nodes per class.

    All sampling is uniform without replacement; the first K of each class's
    draw become support, the remainder query.
    """
    labels = np.asarray(labels, dtype=np.int64)
    class_ids = np.asarray(sorted(class_ids), dtype=np.int64)
    if class_ids.size < n_way:
        raise ValueError(f"split section has {class_ids.size} classes, "
                         f"need {n_way}")
    chosen = rng.choice(class_ids, size=n_way, replace=False)
    support_ids, support_labels = [], []
    query_ids, query_labels = [], []
    for c in chosen:
        pool = np.flatnonzero(labels == c)
        if pool.size < k_shot + q_query:
            raise ValueError(f"class {int(c)} has {pool.size} nodes, "
                             f"need {k_shot + q_query}")
        picked = rng.choice(pool, size=k_shot + q_query, replace=False)
        support_ids.append(picked[:k_shot])
        query_ids.append(picked[k_shot:])
        support_labels.append(np.full(k_shot, c))
        query_labels.append(np.full(q_query, c))
    return Episode(n_way, k_shot, q_query,
                   np.concatenate(support_ids), np.concatenate(support_labels),
                   np.concatenate(query_ids), np.concatenate(query_labels),
                   np.asarray(chosen, dtype=np.int64))


def one_hot_labels(episode_labels: np.ndarray, classes: np.ndarray) -> np.ndarray:
    """Map global class ids to episode-local one-hot rows (class order fixed)."""
    classes = np.asarray(classes, dtype=np.int64)
    positions = {int(c): i for i, c in enumerate(classes)}
    out = np.zeros((len(episode_labels), len(classes)))
    for row, lab in enumerate(np.asarray(episode_labels, dtype=np.int64)):
        out[row, positions[int(lab)]] = 1.0
    return out
