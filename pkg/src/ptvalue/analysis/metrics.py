"""Error metrics, curve areas and confidence intervals."""
from __future__ import annotations

from typing import Sequence

import numpy as np

Z_90 = 1.645


def rmsve(estimate, truth, weights=None) -> float:
    """Root mean squared value error; uniform over states unless ``weights`` is given."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    sq = (estimate - truth) ** 2
    if weights is None:
        return float(np.sqrt(sq.mean()))
    weights = np.asarray(weights, dtype=float)
    return float(np.sqrt((weights * sq).sum() / weights.sum()))


def offtask_mse(estimate, task_values: Sequence[np.ndarray], current_task: int) -> float:
    """Mean over the non-current tasks of the mean squared error against each one."""
    if len(task_values) < 2:
        raise ValueError("off-task error needs at least two tasks")
    estimate = np.asarray(estimate, dtype=float)
    errs = [np.mean((estimate - v) ** 2) for i, v in enumerate(task_values) if i != current_task]
    return float(np.mean(errs))


def auc(curve) -> float:
    """Area under a per-step curve: the plain sum of its entries."""
    return float(np.sum(np.asarray(curve, dtype=float)))


def mean_ci(samples, z: float = Z_90) -> tuple[float, float]:
    """Mean and half-width ``z * std / sqrt(n)`` (sample standard deviation)."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(z * x.std(ddof=1) / np.sqrt(x.size))


def intervals_separated(lower_samples, upper_samples, z: float = Z_90) -> bool:
    """True if the CI of ``lower_samples`` lies strictly below that of ``upper_samples``."""
    m_lo, h_lo = mean_ci(lower_samples, z)
    m_hi, h_hi = mean_ci(upper_samples, z)
    return m_lo + h_lo < m_hi - h_hi
