"""Entropic optimal transport between support and query embeddings.

The coupling is solved by Sinkhorn-Knopp scaling in the log domain with
uniform marginals (1/NK on support rows, 1/NQ on query columns); support
embeddings and one-hot labels are then pushed through the row-normalized
transpose of the plan, which makes every transported row a convex
combination of support rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TransportPlan:
    plan: np.ndarray          # (NK, NQ) strictly positive coupling
    epsilon: float
    iterations: int
    residual: float           # final max marginal violation, inf-norm
    converged: bool


def pairwise_cost(Z_spt: np.ndarray, Z_qry: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between support rows and query rows."""
    Z_spt = np.atleast_2d(np.asarray(Z_spt, dtype=np.float64))
    Z_qry = np.atleast_2d(np.asarray(Z_qry, dtype=np.float64))
    if Z_spt.shape[1] != Z_qry.shape[1]:
        raise ValueError("support and query dimensions differ: %s vs %s"
                         % (Z_spt.shape, Z_qry.shape))
    diff = Z_spt[:, None, :] - Z_qry[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = a.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def sinkhorn(D: np.ndarray, epsilon: float, tol: float = 1e-6,
             max_iter: int = 1000) -> TransportPlan:
    """Entropy-regularized coupling with uniform marginals.

    Alternating log-domain scalings until the worse of the two marginal
    residuals drops to `tol` (inf-norm) or `max_iter` is hit; the plan
    factors as diag(u) exp(-D / epsilon) diag(v).
    """
    D = np.asarray(D, dtype=np.float64)
    if not np.all(np.isfinite(D)):
        raise ValueError("cost matrix has non-finite entries")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    nk, nq = D.shape
    log_alpha = np.full(nk, -np.log(nk))
    log_beta = np.full(nq, -np.log(nq))
    log_K = -D / epsilon
    f = np.zeros(nk)   # log u
    g = np.zeros(nq)   # log v

    def residual(f, g):
        log_plan = f[:, None] + log_K + g[None, :]
        row = np.abs(np.exp(_logsumexp(log_plan, axis=1)) - np.exp(log_alpha))
        col = np.abs(np.exp(_logsumexp(log_plan, axis=0)) - np.exp(log_beta))
        return max(row.max(), col.max())

    it = 0
    res = residual(f, g)
    while res > tol and it < max_iter:
        f = log_alpha - _logsumexp(log_K + g[None, :], axis=1)
        g = log_beta - _logsumexp(log_K + f[:, None], axis=0)
        it += 1
        res = residual(f, g)
    plan = np.exp(f[:, None] + log_K + g[None, :])
    return TransportPlan(plan, epsilon, it, float(res), res <= tol)


def transport_support(plan: TransportPlan, Z_spt: np.ndarray, Y_spt: np.ndarray,
                      raw_embeddings: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric transport of support embeddings and one-hot labels.

    Rows of the transposed plan are renormalized to sum to one (under exact
    uniform marginals this equals multiplying by NQ), so transported rows
    keep the support scale and label rows are probability vectors. With
    `raw_embeddings` the embeddings use the unnormalized plan^T as written,
    while labels stay barycentric so they remain valid soft targets.
    """
    Z_spt = np.atleast_2d(np.asarray(Z_spt, dtype=np.float64))
    Y_spt = np.atleast_2d(np.asarray(Y_spt, dtype=np.float64))
    B = plan.plan.T.copy()
    row_sums = B.sum(axis=1)
    if np.any(row_sums < 1e-12):
        raise ValueError("degenerate transport plan: near-zero column mass")
    B_norm = B / row_sums[:, None]
    Z_hat = (B if raw_embeddings else B_norm) @ Z_spt
    Y_hat = B_norm @ Y_spt
    return Z_hat, Y_hat
