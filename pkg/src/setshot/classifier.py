"""Weight-penalized softmax classifier trained on soft targets.

The few-shot head: full-batch Adam on mean cross-entropy between
softmax(Z theta + b) and transported (soft) labels, plus an L2 penalty on
the weight matrix. Zero init makes the initial prediction uniform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .nn import Tensor


@dataclass
class LinearClassifier:
    weight: np.ndarray      # (dim, n_classes)
    bias: np.ndarray        # (n_classes,)
    l2_penalty: float

    def __post_init__(self):
        if self.l2_penalty < 0:
            raise ValueError("l2 penalty must be nonnegative")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise ValueError("non-finite classifier parameters")


def _soft_ce_loss(theta: Tensor, bias: Tensor, Z: np.ndarray, Y: np.ndarray,
                  l2: float) -> Tensor:
    logits = nn.add(nn.matmul(Tensor(Z), theta), bias)
    lse = nn.reshape(nn.logsumexp_rows(logits), (Z.shape[0], 1))
    logp = nn.add(logits, nn.neg(lse))
    ce = nn.scale(nn.tsum(nn.mul(Tensor(Y), logp)), -1.0 / Z.shape[0])
    return nn.add(ce, nn.scale(nn.tsum(nn.mul(theta, theta)), l2))


def train_soft(Z: np.ndarray, Y: np.ndarray, l2: float = 1e-3,
               epochs: int = 500, lr: float = 0.01) -> LinearClassifier:
    """Fit by full-batch Adam; returns the final parameters.

    `Y` rows are soft targets and must sum to one. Loss settles near the
    convex optimum well inside the default budget on episode-sized inputs.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if Z.shape[0] != Y.shape[0]:
        raise ValueError("row mismatch between embeddings and targets")
    if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(Y))):
        raise ValueError("non-finite training inputs")
    if np.any(np.abs(Y.sum(axis=1) - 1.0) > 1e-6) or np.any(Y < 0):
        raise ValueError("soft targets must be nonnegative rows summing to 1")
    theta = nn.parameter(np.zeros((Z.shape[1], Y.shape[1])))
    bias = nn.parameter(np.zeros(Y.shape[1]))
    opt = nn.Adam([theta, bias], lr=lr)
    for _ in range(epochs):
        opt.zero_grad()
        loss = _soft_ce_loss(theta, bias, Z, Y, l2)
        loss.backward()
        opt.step()
    return LinearClassifier(theta.data, bias.data, l2)


def training_loss_history(Z, Y, l2=1e-3, epochs=500, lr=0.01) -> np.ndarray:
    """Per-epoch loss of the same schedule as train_soft (diagnostics/tests)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    theta = nn.parameter(np.zeros((Z.shape[1], Y.shape[1])))
    bias = nn.parameter(np.zeros(Y.shape[1]))
    opt = nn.Adam([theta, bias], lr=lr)
    history = np.empty(epochs)
    for e in range(epochs):
        opt.zero_grad()
        loss = _soft_ce_loss(theta, bias, Z, Y, l2)
        history[e] = loss.item()
        loss.backward()
        opt.step()
    return history


def predict(clf: LinearClassifier, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Argmax labels plus softmax probability rows; ties go to the lowest index."""
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if Z.shape[1] != clf.weight.shape[0]:
        raise ValueError("embedding dimension does not match classifier")
    logits = Z @ clf.weight + clf.bias
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs = shifted / shifted.sum(axis=1, keepdims=True)
    return logits.argmax(axis=1), probs


def accuracy(pred: np.ndarray, true: np.ndarray) -> float:
    pred = np.asarray(pred)
    true = np.asarray(true)
    if pred.shape != true.shape:
        raise ValueError("prediction and label lengths differ")
    return float(np.mean(pred == true))
