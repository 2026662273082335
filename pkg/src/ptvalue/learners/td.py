"""Linear TD(0) prediction and Q-learning baselines."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, NumericalError


def check_finite(arr: np.ndarray, context: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite weights after {context}")


def td_update(w: np.ndarray, transition, alpha: float, features, discount: float) -> np.ndarray:
    """One semi-gradient TD(0) step; returns the new weight vector."""
    phi = features(transition.state)
    v_next = 0.0 if transition.terminal else float(w @ features(transition.next_state))
    with np.errstate(over="ignore", invalid="ignore"):
        delta = transition.reward + discount * v_next - float(w @ phi)
        out = w + alpha * delta * phi
    check_finite(out, f"TD update from state {transition.state!r}")
    return out


class TDLearner:
    """Linear TD(0). With ``reset_on_boundary`` the weights are zeroed at each visible task change."""

    def __init__(self, features, alpha: float, discount: float, reset_on_boundary: bool = False,
                 init=None):
        if alpha < 0:
            raise ConfigError("alpha must be nonnegative")
        self.features = features
        self.alpha = float(alpha)
        self.discount = float(discount)
        self.reset_on_boundary = reset_on_boundary
        self.w = np.zeros(features.dimension) if init is None else np.array(init, dtype=float)

    def value(self, state) -> float:
        return float(self.w @ self.features(state))

    def values(self, states) -> np.ndarray:
        return self.features.matrix(states) @ self.w

    def update(self, transition) -> None:
        self.w = td_update(self.w, transition, self.alpha, self.features, self.discount)

    def retained_values(self, states) -> np.ndarray:
        return self.values(states)

    def task_boundary(self) -> None:
        if self.reset_on_boundary:
            self.w = np.zeros_like(self.w)

    def clock_tick(self, unit: str) -> None:
        pass


class QLearner:
    """Linear Q-learning with one weight vector per action."""

    def __init__(self, features, n_actions: int, alpha: float, discount: float,
                 reset_on_boundary: bool = False):
        if alpha < 0:
            raise ConfigError("alpha must be nonnegative")
        self.features = features
        self.n_actions = int(n_actions)
        self.alpha = float(alpha)
        self.discount = float(discount)
        self.reset_on_boundary = reset_on_boundary
        self.w = np.zeros((self.n_actions, features.dimension))

    def q_values(self, state) -> np.ndarray:
        return self.w @ self.features(state)

    def update(self, transition) -> None:
        phi = self.features(transition.state)
        q_next = 0.0 if transition.terminal else float(self.q_values(transition.next_state).max())
        delta = transition.reward + self.discount * q_next - float(self.w[transition.action] @ phi)
        self.w[transition.action] += self.alpha * delta * phi
        check_finite(self.w[transition.action], f"Q update from state {transition.state!r}")

    def task_boundary(self) -> None:
        if self.reset_on_boundary:
            self.w = np.zeros_like(self.w)

    def clock_tick(self, unit: str) -> None:
        pass
