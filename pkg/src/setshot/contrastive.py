"""Temperature-scaled InfoNCE over paired embeddings from two views.

One implementation serves both the node-level and the set-level objectives;
they differ only in what embeddings are fed in. The denominator for anchor i
runs over every other row (the positive included), and is evaluated through
a max-shifted log-sum-exp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .nn import Tensor

_DIAG_MASK = -1e30


@dataclass
class ContrastiveBatch:
    """2n row-normalized embeddings with an involutive positive-pair map."""

    embeddings: Tensor          # (2n, d) rows unit-norm
    partner: np.ndarray         # (2n,) int, partner[partner[i]] == i, != i
    tau: float

    def __post_init__(self):
        self.partner = np.asarray(self.partner, dtype=np.int64)
        E = self.embeddings.data
        if E.ndim != 2 or E.shape[0] != self.partner.size:
            raise ValueError("embedding rows do not match partner map")
        if E.shape[0] < 2:
            raise ValueError("need at least one positive pair")
        if self.tau <= 0:
            raise ValueError(f"temperature must be positive, got {self.tau}")
        if np.any(np.isnan(E)):
            raise ValueError("NaN in embeddings")
        idx = np.arange(self.partner.size)
        if np.any(self.partner == idx) or np.any(self.partner[self.partner] != idx):
            raise ValueError("partner map must be an involution without fixed points")
        norms = np.linalg.norm(E, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("embedding rows must be unit-norm within 1e-6")


def paired_batch(view_a: Tensor, view_b: Tensor, tau: float) -> ContrastiveBatch:
    """Interleave two aligned views; row 2i pairs with row 2i+1."""
    n = view_a.data.shape[0]
    partner = np.arange(2 * n)
    partner[0::2] += 1
    partner[1::2] -= 1
    return ContrastiveBatch(nn.interleave_rows(view_a, view_b), partner, tau)


def similarity_matrix(E: np.ndarray) -> np.ndarray:
    """Pairwise dot products of (row-normalized) embeddings."""
    E = np.asarray(E, dtype=np.float64)
    return E @ E.T


def infonce_loss(batch: ContrastiveBatch) -> Tensor:
    """-(1/2n) sum_i log softmax_{k != i}(sim_ik / tau)[partner(i)]."""
    E = batch.embeddings
    two_n = E.data.shape[0]
    sims = nn.scale(nn.matmul(E, nn.transpose(E)), 1.0 / batch.tau)
    mask = np.zeros((two_n, two_n))
    np.fill_diagonal(mask, _DIAG_MASK)
    denom = nn.logsumexp_rows(nn.add(sims, Tensor(mask)))
    pos = nn.take_pairs(sims, np.arange(two_n), batch.partner)
    return nn.tmean(nn.add(denom, nn.neg(pos)))
