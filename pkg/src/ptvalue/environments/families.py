"""Synthetic task families sharing one transition matrix with equidistant values."""
from __future__ import annotations

import numpy as np

from ..core_mdp import MrpModel
from ..errors import ConfigError

# Printed rows do not all sum to one (two sum to 1.01, one to 0.99); see
# normalized_base_transition.
BASE_TRANSITION = np.array(
    [
        [0.18, 0.19, 0.08, 0.16, 0.10, 0.11, 0.18],
        [0.04, 0.05, 0.01, 0.00, 0.40, 0.00, 0.51],
        [0.00, 0.20, 0.00, 0.05, 0.28, 0.06, 0.41],
        [0.17, 0.14, 0.09, 0.26, 0.15, 0.19, 0.01],
        [0.16, 0.16, 0.16, 0.24, 0.17, 0.00, 0.11],
        [0.25, 0.02, 0.24, 0.24, 0.08, 0.05, 0.11],
        [0.00, 0.25, 0.19, 0.44, 0.05, 0.00, 0.07],
    ]
)
BASE_TRANSITION.setflags(write=False)

FAMILY_DISCOUNT = 0.9
REWARD_NOISE_STD = 0.1


def normalized_base_transition() -> np.ndarray:
    return BASE_TRANSITION / BASE_TRANSITION.sum(axis=1, keepdims=True)


def simplex_points(n_points: int, dim: int, side: float, rng: np.random.Generator) -> np.ndarray:
    """``n_points`` vertices of a regular simplex with edge ``side`` in a random subspace of R^dim.

    The vertices are centered at a standard normal base vector.
    """
    if n_points < 1:
        raise ConfigError("need at least one point")
    if n_points - 1 > dim:
        raise ConfigError(f"{n_points} equidistant points need dimension >= {n_points - 1}, got {dim}")
    if side < 0:
        raise ConfigError("side length must be nonnegative")
    base = rng.standard_normal(dim)
    if n_points == 1 or side == 0:
        return np.tile(base, (n_points, 1))
    # Scaled basis vectors e_i * side/sqrt(2) are pairwise `side` apart. Center
    # them, express in an orthonormal basis of the sum-zero hyperplane, then
    # rotate into a random frame of R^dim.
    corners = np.eye(n_points) * side / np.sqrt(2)
    corners -= corners.mean(axis=0)
    hyper, _ = np.linalg.qr(np.eye(n_points) - 1.0 / n_points)
    coords = corners @ hyper[:, : n_points - 1]
    frame, _ = np.linalg.qr(rng.standard_normal((dim, n_points - 1)))
    return base + coords @ frame.T


def epsilon_task_family(
    epsilon: float,
    rng_seed: int = 0,
    base_P=None,
    n_tasks: int = 7,
    discount: float = FAMILY_DISCOUNT,
    reward_noise_std: float = REWARD_NOISE_STD,
) -> list[MrpModel]:
    """Tasks on one chain whose true values are pairwise ``epsilon`` apart in the 2-norm."""
    P = normalized_base_transition() if base_P is None else np.asarray(base_P, dtype=float)
    n_states = P.shape[0]
    values = simplex_points(n_tasks, n_states, float(epsilon), np.random.default_rng(rng_seed))
    A = np.eye(n_states) - discount * P
    variance = np.full(n_states, reward_noise_std**2)
    return [
        MrpModel(
            transition=P,
            reward=A @ v,
            discount=discount,
            reward_variance=variance,
            name=f"eps{epsilon:g}-task{i}",
        )
        for i, v in enumerate(values)
    ]
