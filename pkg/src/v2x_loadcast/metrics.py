"""Training loss and evaluation metric."""

from __future__ import annotations

import numpy as np

from .errors import EmptyBatch, ShapeMismatch


def _pair(predictions, targets) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeMismatch(f"predictions {p.shape} vs targets {t.shape}")
    if p.size == 0:
        raise EmptyBatch("no predictions to score")
    return p, t


def loss_mse(predictions, targets) -> float:
    """Mean squared error, (1/n) * sum((x - xhat)^2)."""
    p, t = _pair(predictions, targets)
    return float(np.mean((t - p) ** 2))


def metric_mae(predictions, targets) -> float:
    """Mean absolute error, (1/n) * sum(|x - xhat|)."""
    p, t = _pair(predictions, targets)
    return float(np.mean(np.abs(t - p)))
