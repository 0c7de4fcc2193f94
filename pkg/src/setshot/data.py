"""Dataset directory ingestion, synthetic block-model graphs, and exports.

A dataset is a directory of four files: `features.tsv` (n rows of d reals),
`edges.tsv` (one `i<TAB>j` pair per line, 0-based), `labels.tsv` (one int
per line), and `splits.json` with train/val/test class lists. Matrices are
TSV so they stay human-diffable; structured data is JSON.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .episodes import ClassSplit
from .graph import Graph, canonical_edges
from .nn import load_tensors, save_tensors

log = logging.getLogger(__name__)


@dataclass
class SbmSpec:
    """Planted-partition generator: dense blocks, sparse cross edges.

    Features are a per-block unit mean vector scaled by `separation` plus
    isotropic Gaussian noise; labels are block ids.
    """

    blocks: int
    nodes_per_block: int
    p_in: float
    p_out: float
    feature_dim: int
    separation: float = 1.0
    noise: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_out <= self.p_in <= 1.0:
            raise ValueError("need 0 <= p_out <= p_in <= 1")
        if self.separation <= 0 or self.noise <= 0:
            raise ValueError("separation and noise must be positive")


def generate_sbm(spec: SbmSpec) -> Graph:
    rng = np.random.default_rng(spec.seed)
    n = spec.blocks * spec.nodes_per_block
    labels = np.repeat(np.arange(spec.blocks), spec.nodes_per_block)

    iu, ju = np.triu_indices(n, k=1)
    probs = np.where(labels[iu] == labels[ju], spec.p_in, spec.p_out)
    keep = rng.random(iu.size) < probs
    edges = np.column_stack((iu[keep], ju[keep]))

    means = rng.standard_normal((spec.blocks, spec.feature_dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    means *= spec.separation
    X = means[labels] + spec.noise * rng.standard_normal((n, spec.feature_dim))
    return Graph(n, edges, X, labels=labels, name=f"sbm-{spec.blocks}x{spec.nodes_per_block}")


# ---------------------------------------------------------------------------
# Dataset directories
# ---------------------------------------------------------------------------

def _parse_matrix(path: Path) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    with open(path, newline="") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split("\t")]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value ({exc})") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValueError(f"{path}:{lineno}: expected {width} columns, "
                                 f"got {len(row)}")
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: empty matrix")
    return np.asarray(rows, dtype=np.float64)


def _parse_edges(path: Path, n: int) -> tuple[np.ndarray, int, int]:
    pairs = []
    self_loops = 0
    with open(path, newline="") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            toks = line.split("\t")
            if len(toks) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'i<TAB>j'")
            try:
                i, j = int(toks[0]), int(toks[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer endpoint") from None
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"{path}:{lineno}: endpoint out of range [0, {n})")
            if i == j:
                self_loops += 1
                continue
            pairs.append((i, j))
    raw = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    edges = canonical_edges(raw, n)
    duplicates = raw.shape[0] - edges.shape[0]
    return edges, self_loops, duplicates


def _parse_labels(path: Path) -> np.ndarray:
    labels = []
    with open(path, newline="") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer label") from None
    return np.asarray(labels, dtype=np.int64)


def load_dataset(directory) -> tuple[Graph, ClassSplit]:
    """Load and validate a dataset directory; nothing partially valid escapes."""
    directory = Path(directory)
    for fname in ("features.tsv", "edges.tsv", "labels.tsv", "splits.json"):
        if not (directory / fname).exists():
            raise FileNotFoundError(f"{directory / fname} is missing")
    X = _parse_matrix(directory / "features.tsv")
    n = X.shape[0]
    edges, self_loops, duplicates = _parse_edges(directory / "edges.tsv", n)
    if self_loops:
        log.warning("%s: dropped %d self-loop(s)", directory, self_loops)
    if duplicates:
        log.warning("%s: removed %d duplicate/reversed edge(s)", directory, duplicates)
    labels = _parse_labels(directory / "labels.tsv")
    if labels.shape[0] != n:
        raise ValueError(f"{directory}: {labels.shape[0]} labels for {n} nodes")
    with open(directory / "splits.json") as f:
        raw = json.load(f)
    split = ClassSplit(raw.get("train_classes", []), raw.get("val_classes", []),
                       raw.get("test_classes", []))
    observed = set(int(c) for c in np.unique(labels))
    declared = set(split.train_classes) | set(split.val_classes) | set(split.test_classes)
    unknown = declared - observed
    if unknown:
        raise ValueError(f"{directory}/splits.json: unknown class ids {sorted(unknown)}")
    graph = Graph(n, edges, X, labels=labels, name=directory.name)
    return graph, split


def save_dataset(graph: Graph, split: ClassSplit, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / "features.tsv", graph.X, delimiter="\t", fmt="%.17g")
    with open(directory / "edges.tsv", "w") as f:
        for i, j in graph.edges:
            f.write(f"{i}\t{j}\n")
    if graph.labels is None:
        raise ValueError("cannot save a dataset without labels")
    with open(directory / "labels.tsv", "w") as f:
        for lab in graph.labels:
            f.write(f"{lab}\n")
    with open(directory / "splits.json", "w") as f:
        json.dump({"train_classes": list(split.train_classes),
                   "val_classes": list(split.val_classes),
                   "test_classes": list(split.test_classes)}, f, indent=2)
        f.write("\n")


# ---------------------------------------------------------------------------
# Result and embedding export
# ---------------------------------------------------------------------------

def export_results(metrics: dict, path) -> None:
    """Write metrics JSON plus a per-episode CSV sibling."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(metrics, f, indent=2, sort_keys=True)
        f.write("\n")
    episodes = metrics.get("episode_accuracies")
    if episodes is not None:
        csv_path = path.with_name(path.stem + "_episodes.csv")
        with open(csv_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["repetition", "episode", "accuracy"])
            for rep, accs in enumerate(episodes):
                for ep, acc in enumerate(accs):
                    writer.writerow([rep, ep, f"{acc:.17g}"])


def load_results(path) -> dict:
    with open(path) as f:
        return json.load(f)


def export_embeddings(Z: np.ndarray, path, as_tsv: bool = False) -> None:
    Z = np.asarray(Z, dtype=np.float64)
    if as_tsv:
        np.savetxt(path, Z, delimiter="\t", fmt="%.9g")
    else:
        save_tensors(path, {"embeddings": Z})


def load_embeddings(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".tsv":
        return np.loadtxt(path, delimiter="\t", ndmin=2)
    return load_tensors(path)["embeddings"]
