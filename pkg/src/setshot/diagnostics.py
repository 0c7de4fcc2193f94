"""Diagnostics: energy distance for shift measurement and a 2-D projection.

The energy distance uses the V-statistic form (all ordered pairs, diagonal
included), so identical point sets score exactly zero. The projection is a
plain top-2 PCA computed by power iteration with deflation; it replaces
density plots with exportable coordinates.
"""

from __future__ import annotations

import numpy as np


def _mean_cross_distance(A: np.ndarray, B: np.ndarray) -> float:
    diff = A[:, None, :] - B[None, :, :]
    return float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).mean())


def energy_distance(A: np.ndarray, B: np.ndarray) -> float:
    """2 E||a-b|| - E||a-a'|| - E||b-b'|| over all ordered pairs."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    return (2.0 * _mean_cross_distance(A, B)
            - _mean_cross_distance(A, A)
            - _mean_cross_distance(B, B))


def shift_diagnostic(Z_spt: np.ndarray, Z_qry: np.ndarray,
                     Z_hat: np.ndarray) -> tuple[float, float]:
    """Energy distance to the query set before and after transport."""
    return (energy_distance(Z_spt, Z_qry), energy_distance(Z_hat, Z_qry))


def pca_project(Z: np.ndarray, iterations: int = 200) -> np.ndarray:
    """Project rows onto the top-2 principal components.

    Power iteration with one deflation step; the starting vector is fixed so
    the output is deterministic. Component signs are normalized to a
    positive leading entry.
    """
    Z = np.asarray(Z, dtype=np.float64)
    centered = Z - Z.mean(axis=0, keepdims=True)
    cov = centered.T @ centered / max(len(Z) - 1, 1)
    components = []
    work = cov.copy()
    for _ in range(2):
        v = np.ones(cov.shape[0]) / np.sqrt(cov.shape[0])
        for _ in range(iterations):
            v = work @ v
            norm = np.linalg.norm(v)
            if norm < 1e-30:
                break
            v /= norm
        pivot = np.flatnonzero(np.abs(v) > 1e-12)
        if pivot.size and v[pivot[0]] < 0:
            v = -v
        components.append(v)
        eigval = float(v @ work @ v)
        work = work - eigval * np.outer(v, v)
    return centered @ np.column_stack(components)
