"""End-to-end orchestration: pretraining, embedding, episodic evaluation.

Pretraining loop per epoch: augment two views, propagate and linearly
encode both, take the node-level contrastive loss on projected/normalized
embeddings, build cross-view top-k sets and take the set-level loss, then
one Adam step on the sum. Evaluation samples N-way K-shot episodes, aligns
the support onto the query distribution by entropic transport (unless
ablated), trains a penalized softmax head per episode, and reports mean
accuracy per repetition and pooled.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import nn
from .augment import AugmentConfig, two_views
from .classifier import accuracy, predict, train_soft
from .config import RunConfig
from .contrastive import infonce_loss, paired_batch
from .diagnostics import shift_diagnostic
from .episodes import ClassSplit, Episode, one_hot_labels, sample_episode
from .graph import Graph, normalize_adjacency, propagate
from .nn import MlpProjector, Tensor
from .rngs import EPISODE_STREAM, PARAM_STREAM, substream
from .sets import (DeepSetsEncoder, build_final_embeddings, build_set_batch,
                   retrieval_purity, topk_cross_retrieve)
from .transport import pairwise_cost, sinkhorn, transport_support

log = logging.getLogger(__name__)


class EncoderStack:
    """All trainable pieces: encoder weight, two projectors, set encoder."""

    def __init__(self, feature_dim: int, cfg: RunConfig):
        d, h = cfg.embed_dim, cfg.hidden_dim
        self.feature_dim = feature_dim
        self.cfg = cfg
        self.w_enc = nn.init_uniform((feature_dim, d), feature_dim,
                                     substream(cfg.seed, PARAM_STREAM, 0))
        self.proj_node = MlpProjector(d, h, d, substream(cfg.seed, PARAM_STREAM, 1))
        self.set_encoder = DeepSetsEncoder(
            MlpProjector(d, h, d, substream(cfg.seed, PARAM_STREAM, 2)))
        self.proj_set = MlpProjector(d, h, d, substream(cfg.seed, PARAM_STREAM, 3))

    def parameters(self) -> list[Tensor]:
        return ([self.w_enc] + self.proj_node.parameters()
                + self.set_encoder.mlp.parameters() + self.proj_set.parameters())

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = {"w_enc": self.w_enc.data}
        for prefix, mlp in (("proj_node", self.proj_node),
                            ("set_mlp", self.set_encoder.mlp),
                            ("proj_set", self.proj_set)):
            for attr in ("w1", "b1", "w2", "b2"):
                out[f"{prefix}.{attr}"] = getattr(mlp, attr).data
        return out

    def save(self, path) -> None:
        nn.save_tensors(path, self.named_arrays())

    @classmethod
    def load(cls, path, cfg: RunConfig) -> "EncoderStack":
        arrays = nn.load_tensors(path)
        stack = cls(arrays["w_enc"].shape[0], cfg)
        stack.w_enc.data = arrays["w_enc"]
        for prefix, mlp in (("proj_node", stack.proj_node),
                            ("set_mlp", stack.set_encoder.mlp),
                            ("proj_set", stack.proj_set)):
            for attr in ("w1", "b1", "w2", "b2"):
                getattr(mlp, attr).data = arrays[f"{prefix}.{attr}"]
        return stack


def _encode_view(stack: EncoderStack, g: Graph, hops: int) -> Tensor:
    prop = propagate(normalize_adjacency(g), g.X, hops)
    return nn.linear_forward(stack.w_enc, Tensor(prop))


def meta_train(g: Graph, cfg: RunConfig) -> tuple[EncoderStack, np.ndarray]:
    """Contrastive pretraining; returns the trained stack and loss history.

    Stops early once the combined loss has gone `patience` consecutive
    epochs without improving the best value by a relative `min_delta`.
    Raises if the loss turns non-finite, naming the epoch.
    """
    stack = EncoderStack(g.d, cfg)
    aug = AugmentConfig(cfg.edge_drop_ratio, cfg.feature_mask_ratio, cfg.seed)
    opt = nn.Adam(stack.parameters(), lr=cfg.lr)
    orig_prop = None
    if cfg.retrieve_on_original and not cfg.no_set:
        orig_prop = propagate(normalize_adjacency(g), g.X, cfg.hops)

    history: list[float] = []
    best = np.inf
    stale = 0
    for epoch in range(cfg.max_epochs):
        g1, g2 = two_views(g, aug, epoch)
        H1 = _encode_view(stack, g1, cfg.hops)
        H2 = _encode_view(stack, g2, cfg.hops)

        terms = []
        if not cfg.no_instance:
            E1 = nn.l2_normalize_rows(stack.proj_node(H1))
            E2 = nn.l2_normalize_rows(stack.proj_node(H2))
            terms.append(infonce_loss(paired_batch(E1, E2, cfg.temperature)))
        if not cfg.no_set:
            if cfg.retrieve_on_original:
                H_orig = nn.linear_forward(stack.w_enc, Tensor(orig_prop))
                terms.append(infonce_loss(build_set_batch(
                    H_orig, H_orig, stack.set_encoder, stack.proj_set,
                    cfg.top_k, cfg.temperature)))
            else:
                set_loss = infonce_loss(build_set_batch(
                    H1, H2, stack.set_encoder, stack.proj_set,
                    cfg.top_k, cfg.temperature))
                if cfg.symmetric_sets:
                    other = infonce_loss(build_set_batch(
                        H2, H1, stack.set_encoder, stack.proj_set,
                        cfg.top_k, cfg.temperature))
                    set_loss = nn.scale(nn.add(set_loss, other), 0.5)
                terms.append(set_loss)

        loss = terms[0] if len(terms) == 1 else nn.add(terms[0], terms[1])
        value = loss.item()
        if not np.isfinite(value):
            raise RuntimeError(f"training diverged at epoch {epoch}")
        history.append(value)

        opt.zero_grad()
        loss.backward()
        opt.step()

        if value < best * (1.0 - cfg.min_delta):
            best = value
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                log.info("early stop at epoch %d (best loss %.6f)", epoch, best)
                break
    return stack, np.asarray(history)


def build_embeddings(g: Graph, stack: EncoderStack, cfg: RunConfig) -> np.ndarray:
    """Encoder output on the clean graph, concatenated with set features."""
    prop = propagate(normalize_adjacency(g), g.X, cfg.hops)
    H = prop @ stack.w_enc.data
    return build_final_embeddings(H, stack.set_encoder, cfg.top_k)


@dataclass
class EpisodeResult:
    accuracy: float
    shift_before: float | None = None
    shift_after: float | None = None


def run_episode(Z: np.ndarray, episode: Episode, cfg: RunConfig,
                with_shift: bool = False) -> EpisodeResult:
    """Classify one episode's queries, calibrating support via transport."""
    Z_spt = Z[episode.support_ids]
    Z_qry = Z[episode.query_ids]
    Y_spt = one_hot_labels(episode.support_labels, episode.classes)
    before = after = None
    if cfg.no_ot:
        Z_fit, Y_fit = Z_spt, Y_spt
    else:
        plan = sinkhorn(pairwise_cost(Z_spt, Z_qry), cfg.ot_epsilon,
                        cfg.ot_tol, cfg.ot_max_iter)
        Z_fit, Y_fit = transport_support(plan, Z_spt, Y_spt,
                                         raw_embeddings=cfg.raw_plan_transport)
        if with_shift:
            before, after = shift_diagnostic(Z_spt, Z_qry, Z_fit)
    clf = train_soft(Z_fit, Y_fit, l2=cfg.clf_l2, epochs=cfg.clf_epochs,
                     lr=cfg.clf_lr)
    pred, _ = predict(clf, Z_qry)
    local = {int(c): i for i, c in enumerate(episode.classes)}
    true = np.array([local[int(c)] for c in episode.query_labels])
    return EpisodeResult(accuracy(pred, true), before, after)


def meta_test(Z: np.ndarray, labels: np.ndarray, split: ClassSplit,
              cfg: RunConfig, section: str = "test") -> dict:
    """Episodic evaluation; returns the metrics payload.

    `mean_accuracy` pools every episode; `std_accuracy` is across the
    repetition means (the protocol's headline deviation) and
    `std_accuracy_pooled` across all episodes.
    """
    class_ids = split.section(section)
    if not class_ids:
        raise ValueError(f"split section {section!r} has no classes")
    per_rep: list[list[float]] = []
    for rep in range(cfg.repetitions):
        rng = substream(cfg.seed, EPISODE_STREAM, rep)
        accs = []
        for _ in range(cfg.episodes):
            episode = sample_episode(labels, class_ids, cfg.n_way, cfg.k_shot,
                                     cfg.q_query, rng)
            accs.append(run_episode(Z, episode, cfg).accuracy)
        per_rep.append(accs)
    rep_means = np.array([np.mean(a) for a in per_rep])
    pooled = np.concatenate(per_rep)
    return {
        "n_way": cfg.n_way,
        "k_shot": cfg.k_shot,
        "episodes": cfg.episodes,
        "repetitions": cfg.repetitions,
        "mean_accuracy": float(pooled.mean()),
        "std_accuracy": float(rep_means.std()),
        "std_accuracy_pooled": float(pooled.std()),
        "repetition_means": [float(x) for x in rep_means],
        "episode_accuracies": [[float(a) for a in accs] for accs in per_rep],
        "ablation": {
            "no_instance": cfg.no_instance,
            "no_set": cfg.no_set,
            "no_ot": cfg.no_ot,
            "retrieve_on_original": cfg.retrieve_on_original,
        },
        "config": cfg.to_dict(),
    }


def shift_report(Z: np.ndarray, labels: np.ndarray, split: ClassSplit,
                 cfg: RunConfig, episodes: int | None = None,
                 section: str = "test") -> list[tuple[float, float]]:
    """Per-episode (before, after) energy distances between support and query."""
    class_ids = split.section(section)
    rng = substream(cfg.seed, EPISODE_STREAM, 0)
    pairs = []
    for _ in range(episodes if episodes is not None else cfg.episodes):
        episode = sample_episode(labels, class_ids, cfg.n_way, cfg.k_shot,
                                 cfg.q_query, rng)
        result = run_episode(Z, episode, cfg, with_shift=True)
        pairs.append((result.shift_before, result.shift_after))
    return pairs


def embedding_retrieval_purity(Z: np.ndarray, labels: np.ndarray,
                               cfg: RunConfig) -> float:
    """Purity of top-k retrieval on the encoder half of the embeddings."""
    half = Z.shape[1] // 2
    H = Z[:, :half]
    k = min(cfg.top_k, H.shape[0])
    k -= k % 2
    index = topk_cross_retrieve(H, H, max(k, 2))
    return retrieval_purity(index, labels)
