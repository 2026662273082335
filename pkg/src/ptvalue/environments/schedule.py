"""Task schedules: which task is active when, and where the boundaries fall."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from ..errors import ConfigError, UsageError

UNITS = ("episode", "step")
ORDERS = ("cycle", "iid")


@dataclass(frozen=True)
class GridTask:
    """Goal rewards for one task, keyed by goal id."""

    goal_rewards: dict
    name: str = ""

    def reward_for(self, goal_id: str) -> float:
        return float(self.goal_rewards[goal_id])


@dataclass(frozen=True)
class TaskSchedule:
    """An ordered list of tasks, each active for ``switch_every`` units.

    ``order="cycle"`` walks the list in order; ``order="iid"`` draws each block's
    task uniformly using ``seed``. ``boundary_visible=False`` hides task changes
    from the learner (the fully continual setting).
    """

    tasks: tuple
    switch_every: int
    unit: str = "episode"
    boundary_visible: bool = True
    order: str = "cycle"
    seed: int = 0
    _iid_cache: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.tasks:
            raise ConfigError("schedule needs at least one task")
        if int(self.switch_every) < 1:
            raise ConfigError(f"switch_every must be >= 1, got {self.switch_every}")
        object.__setattr__(self, "switch_every", int(self.switch_every))
        if self.unit not in UNITS:
            raise ConfigError(f"unit must be one of {UNITS}, got {self.unit!r}")
        if self.order not in ORDERS:
            raise ConfigError(f"order must be one of {ORDERS}, got {self.order!r}")

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    def block_task(self, block: int) -> int:
        """Index of the task active during the ``block``-th switch interval."""
        if block < 0:
            raise ValueError("block must be nonnegative")
        if self.order == "cycle":
            return block % self.n_tasks
        cache = self._iid_cache
        if len(cache) <= block:
            # regenerate the whole prefix so the sequence depends only on the seed
            n = max(2 * block + 2, 64)
            rng = np.random.default_rng(self.seed)
            cache[:] = rng.integers(0, self.n_tasks, size=n).tolist()
        return cache[block]

    def task_index_at(self, unit_count: int) -> int:
        return self.block_task(unit_count // self.switch_every)

    def is_task_start(self, unit_count: int) -> bool:
        return unit_count > 0 and unit_count % self.switch_every == 0

    def n_boundaries(self, n_units: int) -> int:
        return max(0, (n_units - 1) // self.switch_every)


@dataclass
class Transition:
    state: Any
    action: int
    reward: float
    next_state: Any
    terminal: bool
    boundary: bool = False
    truncated: bool = False
    task_id: int = 0

    def __post_init__(self):
        if not np.isfinite(self.reward):
            raise ValueError("transition reward must be finite")


class ScheduleClock:
    """Tracks elapsed episodes and steps and announces task boundaries.

    A boundary belongs to the first transition of a new task. It is reported
    through :func:`schedule_step` only when the schedule makes it visible, but
    :attr:`at_task_start` is always available to the harness for metrics.
    """

    def __init__(self, schedule: TaskSchedule):
        self.schedule = schedule
        self.episode = 0
        self.total_steps = 0
        self.episode_steps = 0

    @property
    def unit_count(self) -> int:
        return self.episode if self.schedule.unit == "episode" else self.total_steps

    @property
    def task_id(self) -> int:
        return self.schedule.task_index_at(self.unit_count)

    @property
    def task(self):
        return self.schedule.tasks[self.task_id]

    @property
    def at_task_start(self) -> bool:
        if self.schedule.unit == "episode" and self.episode_steps != 0:
            return False
        return self.schedule.is_task_start(self.unit_count)

    def tick_step(self) -> None:
        self.total_steps += 1
        self.episode_steps += 1

    def end_episode(self) -> None:
        self.episode += 1
        self.episode_steps = 0


def schedule_step(env, clock: ScheduleClock, action: int, rng: Optional[np.random.Generator] = None) -> Transition:
    """Apply the active task, advance ``env`` one step and the clock with it."""
    if env.needs_reset:
        raise UsageError("episode has terminated; call reset() before stepping again")
    boundary = clock.at_task_start and clock.schedule.boundary_visible
    task_id = clock.task_id
    env.set_task(clock.task)
    state = env.state
    reward, next_state, terminal, truncated = env.step(action, rng)
    clock.tick_step()
    if terminal or truncated:
        clock.end_episode()
    return Transition(
        state=state,
        action=action,
        reward=reward,
        next_state=next_state,
        terminal=terminal,
        boundary=boundary,
        truncated=truncated,
        task_id=task_id,
    )
