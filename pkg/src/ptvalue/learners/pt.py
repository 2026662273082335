"""Learners that split the value into a slow permanent part and a fast transient part.

The transient weights ``w`` follow semi-gradient TD (or Q-learning) on the
summed estimate. The permanent weights ``theta`` only move at consolidation,
where they are regressed towards the summed estimate at every buffered record.
In semi-continual mode consolidation happens at visible task boundaries and is
followed by a transient reset; in continual mode it happens every ``k`` clock
units and the transient weights are decayed by ``decay`` instead.
"""
from __future__ import annotations

import warnings
from typing import Callable, Optional

import numpy as np

from ..errors import ConfigError
from .td import check_finite

MODES = ("semi_continual", "continual")
TARGET_MODES = ("frozen", "live")
UNITS = ("episode", "step")


class _PermanentTransientBase:
    def __init__(self, alpha: float, alpha_bar: float, discount: float, mode: str = "semi_continual",
                 k: Optional[int] = None, decay: float = 0.0, unit: str = "episode",
                 target_mode: str = "frozen", sweeps: int = 1,
                 alpha_bar_schedule: Optional[Callable[[int], float]] = None):
        if alpha <= 0 or alpha_bar <= 0:
            raise ConfigError("alpha and alpha_bar must be positive")
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        if not 0.0 <= decay <= 1.0:
            raise ConfigError(f"decay must lie in [0, 1], got {decay}")
        if k is not None and int(k) < 1:
            raise ConfigError(f"consolidation period k must be >= 1, got {k}")
        if unit not in UNITS:
            raise ConfigError(f"unit must be one of {UNITS}, got {unit!r}")
        if target_mode not in TARGET_MODES:
            raise ConfigError(f"target_mode must be one of {TARGET_MODES}, got {target_mode!r}")
        if sweeps < 1:
            raise ConfigError("sweeps must be >= 1")
        self.alpha = float(alpha)
        self.alpha_bar = float(alpha_bar)
        self.discount = float(discount)
        self.mode = mode
        self.k = None if k is None else int(k)
        self.decay = float(decay)
        self.unit = unit
        self.target_mode = target_mode
        self.sweeps = int(sweeps)
        self.alpha_bar_schedule = alpha_bar_schedule
        self.buffer: list = []
        self.n_consolidations = 0
        self._ticks = 0

    def current_alpha_bar(self) -> float:
        if self.alpha_bar_schedule is None:
            return self.alpha_bar
        return float(self.alpha_bar_schedule(self.n_consolidations))

    def task_boundary(self) -> None:
        """Consolidate and reset the transient weights (semi-continual only)."""
        if self.mode != "semi_continual":
            return
        self.consolidate()
        self.w = np.zeros_like(self.w)

    def clock_tick(self, unit: str) -> None:
        """Count one elapsed unit; in continual mode consolidate every ``k`` of them."""
        if self.mode != "continual" or unit != self.unit or self.k is None:
            return
        self._ticks += 1
        if self._ticks % self.k == 0:
            self.consolidate()
            self.w = self.decay * self.w

    def consolidate(self) -> None:
        if not self.buffer:
            warnings.warn("consolidation called with an empty buffer", RuntimeWarning, stacklevel=2)
            return
        step = self.current_alpha_bar()
        records = [self._record_features(rec) for rec in self.buffer]
        targets = None
        if self.target_mode == "frozen":
            targets = [self._combined(rec, phi) for rec, phi in zip(self.buffer, records)]
        for _ in range(self.sweeps):
            for i, (rec, phi) in enumerate(zip(self.buffer, records)):
                target = targets[i] if targets is not None else self._combined(rec, phi)
                self._permanent_step(rec, phi, step, target)
        check_finite(self.theta, "consolidation")
        self.buffer.clear()
        self.n_consolidations += 1

    permanent_consolidate = consolidate


class PTLearner(_PermanentTransientBase):
    """Permanent/transient TD(0) prediction with linear features."""

    def __init__(self, features, alpha: float, alpha_bar: float, discount: float, **kwargs):
        super().__init__(alpha, alpha_bar, discount, **kwargs)
        self.features = features
        self.theta = np.zeros(features.dimension)
        self.w = np.zeros(features.dimension)

    def permanent_value(self, state) -> float:
        return float(self.theta @ self.features(state))

    def transient_value(self, state) -> float:
        return float(self.w @ self.features(state))

    def value(self, state) -> float:
        return self.permanent_value(state) + self.transient_value(state)

    def values(self, states) -> np.ndarray:
        X = self.features.matrix(states)
        return X @ self.theta + X @ self.w

    def retained_values(self, states) -> np.ndarray:
        """What survives a task change: the permanent estimate."""
        return self.features.matrix(states) @ self.theta

    def update(self, transition) -> None:
        """Store the state and take a transient TD step on the summed estimate."""
        self.buffer.append(transition.state)
        phi = self.features(transition.state)
        v_next = 0.0 if transition.terminal else self.value(transition.next_state)
        delta = transition.reward + self.discount * v_next - self.value(transition.state)
        self.w = self.w + self.alpha * delta * phi
        check_finite(self.w, f"transient update from state {transition.state!r}")

    transient_update = update

    def _record_features(self, state):
        return self.features(state)

    def _combined(self, state, phi) -> float:
        return float(self.theta @ phi) + float(self.w @ phi)

    def _permanent_step(self, state, phi, step, target) -> None:
        self.theta = self.theta + step * (target - float(self.theta @ phi)) * phi


class PTQLearner(_PermanentTransientBase):
    """Permanent/transient Q-learning; records are ``(state, action)`` pairs."""

    def __init__(self, features, n_actions: int, alpha: float, alpha_bar: float, discount: float,
                 **kwargs):
        super().__init__(alpha, alpha_bar, discount, **kwargs)
        self.features = features
        self.n_actions = int(n_actions)
        self.theta = np.zeros((self.n_actions, features.dimension))
        self.w = np.zeros((self.n_actions, features.dimension))

    def q_values(self, state) -> np.ndarray:
        phi = self.features(state)
        return self.theta @ phi + self.w @ phi

    def permanent_q_values(self, state) -> np.ndarray:
        return self.theta @ self.features(state)

    def update(self, transition) -> None:
        a = transition.action
        self.buffer.append((transition.state, a))
        phi = self.features(transition.state)
        q_next = 0.0 if transition.terminal else float(self.q_values(transition.next_state).max())
        delta = transition.reward + self.discount * q_next - float(self.q_values(transition.state)[a])
        self.w[a] = self.w[a] + self.alpha * delta * phi
        check_finite(self.w[a], f"transient Q update from state {transition.state!r}")

    transient_q_update = update

    def _record_features(self, record):
        return self.features(record[0])

    def _combined(self, record, phi) -> float:
        a = record[1]
        return float(self.theta[a] @ phi) + float(self.w[a] @ phi)

    def _permanent_step(self, record, phi, step, target) -> None:
        a = record[1]
        self.theta[a] = self.theta[a] + step * (target - float(self.theta[a] @ phi)) * phi


def continual_pt_q_step(learner: PTQLearner, transition, unit: str = "step") -> None:
    """Transient update, then advance the consolidation clock by one ``unit``."""
    if learner.mode != "continual":
        raise ConfigError("continual_pt_q_step needs a learner in continual mode")
    learner.update(transition)
    learner.clock_tick(unit)
