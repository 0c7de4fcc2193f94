"""Set-level features: cross-view top-k retrieval, half-splitting, and a
sum-pool + MLP set encoder.

During pretraining each node of view 1 retrieves its k most similar nodes
from view 2 (dot product on the encoder outputs, self-index allowed); the
retrieved set is split into two rank-interleaved halves that form a positive
pair. At inference the retrieval runs on the clean graph against itself and
the full, unsplit set feeds the set encoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .contrastive import ContrastiveBatch, paired_batch
from .nn import MlpProjector, Tensor


@dataclass
class RetrievalIndex:
    """Per-anchor top-k member ids ranked by descending score, ties by id."""

    members: np.ndarray   # (n, k) int64
    scores: np.ndarray    # (n, k) float64

    @property
    def k(self) -> int:
        return self.members.shape[1]


@dataclass
class SetPair:
    """Rank-interleaved halves of one anchor's retrieval set."""

    ids_a: np.ndarray
    ids_b: np.ndarray
    scores_a: np.ndarray
    scores_b: np.ndarray


@dataclass
class DeepSetsEncoder:
    """Permutation-invariant set function: MLP applied to the member sum."""

    mlp: MlpProjector


def topk_cross_retrieve(H1: np.ndarray, H2: np.ndarray, k: int) -> RetrievalIndex:
    """Rank view-2 rows for each view-1 anchor by dot product.

    The anchor's own index is a legitimate member (its counterpart in the
    other view). Requires even k for downstream splitting; ties break toward
    the smaller node id.
    """
    H1 = np.asarray(H1, dtype=np.float64)
    H2 = np.asarray(H2, dtype=np.float64)
    n = H2.shape[0]
    if k % 2 != 0:
        raise ValueError(f"k must be even, got {k}")
    if not 2 <= k <= n:
        raise ValueError(f"k={k} outside [2, {n}]")
    scores = H1 @ H2.T
    # Stable sort on -score keeps ascending id among exact ties.
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    return RetrievalIndex(order.astype(np.int64),
                          np.take_along_axis(scores, order, axis=1))


def split_halves(index: RetrievalIndex, anchor: int) -> SetPair:
    """Odd ranks to one half, even ranks to the other.

    Interleaving by rank gives both halves matched similarity profiles, which
    a contiguous top/bottom split would not.
    """
    if index.k % 2 != 0:
        raise ValueError("retrieval set size must be even to split")
    ids = index.members[anchor]
    scores = index.scores[anchor]
    return SetPair(ids[0::2], ids[1::2], scores[0::2], scores[1::2])


def deepsets_encode(enc: DeepSetsEncoder, members) -> Tensor:
    """Encode one member set: MLP over the columnwise sum."""
    members = members if isinstance(members, Tensor) else Tensor(members)
    if members.data.ndim != 2 or members.data.shape[0] < 1:
        raise ValueError("member set must be a nonempty 2-D matrix")
    pooled = nn.gather_sum(members, np.arange(members.data.shape[0])[None, :])
    return nn.reshape(nn.mlp_forward(enc.mlp, pooled), (enc.mlp.out_dim,))


def encode_member_groups(enc: DeepSetsEncoder, source: Tensor,
                         idx: np.ndarray) -> Tensor:
    """Batched set encoding: row i is the encoding of source[idx[i]]."""
    return nn.mlp_forward(enc.mlp, nn.gather_sum(source, idx))


def build_set_batch(H1: Tensor, H2: Tensor, set_enc: DeepSetsEncoder,
                    projector: MlpProjector, k: int, tau: float) -> ContrastiveBatch:
    """Positive set pairs for every view-1 anchor.

    Retrieval runs on the detached embeddings (no gradient through ranking);
    gradients flow into the member rows, the set encoder, and the projector.
    """
    index = topk_cross_retrieve(H1.data, H2.data, k)
    half_a = index.members[:, 0::2]
    half_b = index.members[:, 1::2]
    emb_a = nn.l2_normalize_rows(projector(encode_member_groups(set_enc, H2, half_a)))
    emb_b = nn.l2_normalize_rows(projector(encode_member_groups(set_enc, H2, half_b)))
    return paired_batch(emb_a, emb_b, tau)


def build_final_embeddings(H: np.ndarray, set_enc: DeepSetsEncoder,
                           k: int) -> np.ndarray:
    """Concatenate encoder output with set features of each node's top-k.

    `H` is the trained encoder output on the clean graph. Retrieval is H
    against itself; the full k-member set is encoded unsplit (k=1 is legal
    here since nothing is split). Output is (n, 2 * d').
    """
    H = np.asarray(H, dtype=np.float64)
    n = H.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    scores = H @ H.T
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    S = encode_member_groups(set_enc, Tensor(H), order).data
    return np.hstack([H, S])


def retrieval_purity(index: RetrievalIndex, labels: np.ndarray) -> float:
    """Fraction of (anchor, member) pairs sharing a label, self-pairs excluded."""
    if labels is None:
        raise ValueError("labels are required for retrieval purity")
    labels = np.asarray(labels, dtype=np.int64)
    n, k = index.members.shape
    anchors = np.repeat(np.arange(n), k)
    members = index.members.ravel()
    keep = anchors != members
    if not np.any(keep):
        raise ValueError("every retrieved pair is a self-pair")
    return float(np.mean(labels[anchors[keep]] == labels[members[keep]]))
