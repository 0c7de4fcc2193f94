"""Run configuration: every knob of pretraining, embedding, and evaluation.

Defaults follow the reference protocol: 2 propagation hops, 16-dim
embeddings and hidden layers, temperature 0.5, top-20 retrieval, Adam at
lr 0.001, and 50-episode x 5-repetition evaluation. The resolved config is
embedded in every metrics payload for provenance.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields


@dataclass
class RunConfig:
    # augmentation
    edge_drop_ratio: float = 0.2
    feature_mask_ratio: float = 0.2
    seed: int = 0
    # encoder
    hops: int = 2
    embed_dim: int = 16
    hidden_dim: int = 16
    temperature: float = 0.5
    top_k: int = 20
    symmetric_sets: bool = False
    # pretraining optimizer
    lr: float = 0.001
    max_epochs: int = 500
    patience: int = 20
    min_delta: float = 1e-3          # relative improvement that resets patience
    # optimal transport
    ot_epsilon: float = 0.1
    ot_tol: float = 1e-6
    ot_max_iter: int = 1000
    raw_plan_transport: bool = False
    # classifier
    clf_l2: float = 1e-3
    clf_epochs: int = 500
    clf_lr: float = 0.01
    # episodic evaluation
    n_way: int = 5
    k_shot: int = 5
    q_query: int = 10
    episodes: int = 50
    repetitions: int = 5
    # ablations
    no_instance: bool = False
    no_set: bool = False
    no_ot: bool = False
    retrieve_on_original: bool = False

    def __post_init__(self):
        if not 0.0 <= self.edge_drop_ratio <= 0.4:
            raise ValueError("edge_drop_ratio outside [0, 0.4]")
        if not 0.0 <= self.feature_mask_ratio <= 0.4:
            raise ValueError("feature_mask_ratio outside [0, 0.4]")
        if self.hops < 0:
            raise ValueError("hops must be nonnegative")
        if min(self.embed_dim, self.hidden_dim) < 1:
            raise ValueError("dimensions must be positive")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.top_k < 1:
            raise ValueError("top_k must be positive")
        if self.ot_epsilon <= 0 or self.ot_tol <= 0 or self.ot_max_iter < 1:
            raise ValueError("invalid optimal-transport settings")
        if self.clf_l2 < 0:
            raise ValueError("clf_l2 must be nonnegative")
        if min(self.n_way, self.k_shot, self.q_query,
               self.episodes, self.repetitions) < 1:
            raise ValueError("episode settings must be positive")
        if self.no_instance and self.no_set:
            raise ValueError("cannot disable both training objectives")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def save_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
