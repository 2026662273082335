"""Action selection."""
from __future__ import annotations

import numpy as np


def greedy_action(q_values: np.ndarray, rng: np.random.Generator) -> int:
    """Argmax with uniform tie-breaking; a random draw is spent only on actual ties."""
    best = np.flatnonzero(q_values == q_values.max())
    if best.size == 1:
        return int(best[0])
    return int(best[int(rng.random() * best.size)])


def act_epsilon_greedy(q_values, epsilon: float, rng: np.random.Generator) -> int:
    """Uniform action with probability ``epsilon``, greedy otherwise."""
    q_values = np.asarray(q_values, dtype=float)
    if rng.random() < epsilon:
        return int(rng.random() * q_values.size)
    return greedy_action(q_values, rng)


def random_action(n_actions: int, rng: np.random.Generator) -> int:
    return int(rng.random() * n_actions)
