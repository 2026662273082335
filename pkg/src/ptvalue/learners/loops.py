"""Reference episode loops driving a learner through a task schedule.

These are the plain-Python versions of the experiment protocol. The harness
uses compiled kernels for the tabular experiments and checks them against
these loops.

RNG protocol (one generator per run, every draw is ``rng.random()``): the
behaviour policy draws first, then the environment draws its own noise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..environments.schedule import ScheduleClock, schedule_step
from ..errors import ConfigError
from .policy import act_epsilon_greedy, random_action


@dataclass
class MetricsRecord:
    seed: int
    step_or_episode: int
    task_id: int
    boundary: bool
    online_metric: float
    offtask_mse: float


def _check_protocol(learner, schedule) -> None:
    if getattr(learner, "mode", None) == "semi_continual" and not schedule.boundary_visible:
        raise ConfigError("semi-continual learners need a schedule with visible task boundaries")


def _boundary_before_acting(learner, clock: ScheduleClock) -> None:
    if clock.at_task_start and clock.schedule.boundary_visible:
        learner.task_boundary()


def prediction_episode_loop(
    learner,
    env,
    n_episodes: int,
    rng: np.random.Generator,
    eval_states: Sequence,
    task_values: Sequence[np.ndarray],
    seed: int = 0,
    policy=None,
) -> list[MetricsRecord]:
    """Evaluate a fixed policy (uniform random by default) while the tasks change.

    After every episode the learner's estimate on ``eval_states`` is scored by
    RMSVE against the active task's true values, and its retained estimate by
    the mean squared error averaged over the other tasks.
    """
    from ..analysis.metrics import offtask_mse, rmsve

    schedule = env.schedule
    _check_protocol(learner, schedule)
    clock = ScheduleClock(schedule)
    rows = []
    for episode in range(n_episodes):
        boundary = clock.at_task_start
        env.reset(rng)
        while not env.needs_reset:
            _boundary_before_acting(learner, clock)
            if policy is None:
                action = random_action(env.n_actions, rng)
            else:
                action = policy(env.state, rng)
            tr = schedule_step(env, clock, action, rng)
            learner.update(tr)
            learner.clock_tick("step")
        task_id = tr.task_id
        online = rmsve(learner.values(eval_states), task_values[task_id])
        off = offtask_mse(learner.retained_values(eval_states), task_values, task_id)
        rows.append(MetricsRecord(seed, episode, task_id, boundary, online, off))
        learner.clock_tick("episode")
    return rows


def control_episode_loop(
    learner,
    env,
    n_episodes: int,
    rng: np.random.Generator,
    epsilon: float = 0.1,
    seed: int = 0,
) -> list[MetricsRecord]:
    """Epsilon-greedy control; each row holds the episode's discounted return."""
    schedule = env.schedule
    _check_protocol(learner, schedule)
    clock = ScheduleClock(schedule)
    rows = []
    for episode in range(n_episodes):
        boundary = clock.at_task_start
        env.reset(rng)
        ret, scale = 0.0, 1.0
        while not env.needs_reset:
            _boundary_before_acting(learner, clock)
            action = act_epsilon_greedy(learner.q_values(env.state), epsilon, rng)
            tr = schedule_step(env, clock, action, rng)
            learner.update(tr)
            learner.clock_tick("step")
            ret += scale * tr.reward
            scale *= env.discount
        rows.append(MetricsRecord(seed, episode, tr.task_id, boundary, ret, float("nan")))
        learner.clock_tick("episode")
    return rows


def step_prediction_loop(learner, mrps, schedule, n_steps: int, rng: np.random.Generator,
                         start_state: Optional[int] = None) -> None:
    """Continuing prediction on MRPs sharing a state space, switching by ``schedule``."""
    from ..core_mdp import sample_next
    from ..environments.schedule import Transition

    clock = ScheduleClock(schedule)
    s = int(rng.integers(mrps[0].n_states)) if start_state is None else start_state
    for _ in range(n_steps):
        _boundary_before_acting(learner, clock)
        mrp = mrps[clock.task_id]
        r, nxt = sample_next(mrp, s, rng)
        learner.update(Transition(s, 0, r, nxt, False, task_id=clock.task_id))
        clock.tick_step()
        learner.clock_tick("step")
        s = nxt
