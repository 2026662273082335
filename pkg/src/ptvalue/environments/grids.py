"""The 5x5 prediction grid and its continuous counterpart on the unit square."""
from __future__ import annotations

import numpy as np

from ..core_mdp import MdpModel, MrpModel, reduce_mdp
from ..errors import ConfigError, UsageError
from .schedule import GridTask, TaskSchedule

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
N_ACTIONS = 4
# (d_row, d_col) per action
MOVES = np.array([[-1, 0], [1, 0], [0, -1], [0, 1]])

CORNERS = ("TL", "TR", "BL", "BR")

# goal rewards (TL, TR, BL, BR) for the four prediction tasks
PREDICTION_TASK_TABLE = (
    (0.0, 1.0, 0.0, 1.0),
    (1.0, 0.0, 1.0, 0.0),
    (0.0, 0.0, 1.0, 1.0),
    (1.0, 1.0, 0.0, 0.0),
)


def prediction_tasks() -> tuple:
    return tuple(
        GridTask(goal_rewards=dict(zip(CORNERS, row)), name=f"task{i + 1}")
        for i, row in enumerate(PREDICTION_TASK_TABLE)
    )


def default_prediction_schedule(switch_every: int = 50, **kwargs) -> TaskSchedule:
    return TaskSchedule(tasks=prediction_tasks(), switch_every=switch_every, **kwargs)


def _check_grid_schedule(schedule: TaskSchedule) -> None:
    for task in schedule.tasks:
        rewards = getattr(task, "goal_rewards", None)
        if rewards is None or set(rewards) != set(CORNERS):
            raise ConfigError(f"grid tasks must supply rewards for goals {CORNERS}")


class DiscreteGrid:
    """5x5 grid, start in the center, one absorbing goal in each corner.

    States are ``row * size + col``. Moving into a wall leaves the agent in
    place. The reward is 0 except on entering a goal.
    """

    discount = 0.9
    n_actions = N_ACTIONS

    def __init__(self, schedule: TaskSchedule = None, size: int = 5):
        self.schedule = default_prediction_schedule() if schedule is None else schedule
        _check_grid_schedule(self.schedule)
        self.size = size
        self.n_states = size * size
        last = size - 1
        self.goal_cells = {"TL": (0, 0), "TR": (0, last), "BL": (last, 0), "BR": (last, last)}
        self.goal_states = {g: r * size + c for g, (r, c) in self.goal_cells.items()}
        self.terminal_mask = np.zeros(self.n_states, dtype=bool)
        self.terminal_mask[list(self.goal_states.values())] = True
        self.start_state = (size // 2) * size + size // 2
        self._goal_reward = np.zeros(self.n_states)
        self.task = None
        self.set_task(self.schedule.tasks[0])
        self.state = self.start_state
        self.needs_reset = True
        self.next_table = self._build_next_table()

    def _build_next_table(self) -> np.ndarray:
        table = np.empty((self.n_states, N_ACTIONS), dtype=np.int64)
        for s in range(self.n_states):
            r, c = divmod(s, self.size)
            for a, (dr, dc) in enumerate(MOVES):
                nr = min(max(r + dr, 0), self.size - 1)
                nc = min(max(c + dc, 0), self.size - 1)
                table[s, a] = nr * self.size + nc
        return table

    def set_task(self, task: GridTask) -> None:
        if task is self.task:
            return
        self.task = task
        self._goal_reward = np.zeros(self.n_states)
        for g, s in self.goal_states.items():
            self._goal_reward[s] = task.reward_for(g)

    def rowcol(self, s: int) -> tuple[int, int]:
        return divmod(int(s), self.size)

    def reset(self, rng=None) -> int:
        self.state = self.start_state
        self.needs_reset = False
        return self.state

    def step(self, action: int, rng=None):
        if self.needs_reset:
            raise UsageError("episode has terminated; call reset() before stepping again")
        nxt = int(self.next_table[self.state, action])
        terminal = bool(self.terminal_mask[nxt])
        reward = float(self._goal_reward[nxt]) if terminal else 0.0
        self.state = nxt
        self.needs_reset = terminal
        return reward, nxt, terminal, False

    def goal_reward_vector(self, task: GridTask) -> np.ndarray:
        out = np.zeros(self.n_states)
        for g, s in self.goal_states.items():
            out[s] = task.reward_for(g)
        return out

    def mdp(self, task: GridTask) -> MdpModel:
        """The episodic MDP of ``task``; goals are absorbing with zero reward."""
        n = self.n_states
        P = np.zeros((n, N_ACTIONS, n))
        R = np.zeros((n, N_ACTIONS))
        goal_r = self.goal_reward_vector(task)
        for s in range(n):
            for a in range(N_ACTIONS):
                if self.terminal_mask[s]:
                    P[s, a, s] = 1.0
                    continue
                nxt = self.next_table[s, a]
                P[s, a, nxt] = 1.0
                R[s, a] = goal_r[nxt]
        start = np.zeros(n)
        start[self.start_state] = 1.0
        return MdpModel(transition=P, reward=R, discount=self.discount, start_dist=start,
                        terminal=self.terminal_mask, name=f"discrete-grid-{task.name}")

    def induced_mrp(self, task: GridTask, policy=None) -> MrpModel:
        """The Markov reward process under ``policy`` (uniform random by default)."""
        if policy is None:
            policy = np.full((self.n_states, N_ACTIONS), 1.0 / N_ACTIONS)
        return reduce_mdp(self.mdp(task), policy)


class ContinuousGrid:
    """The unit square with goal regions within 0.1 (1-norm) of each corner.

    Positions are ``(x, y)`` with ``(0, 0)`` the top-left corner; *up* lowers
    ``y``. Each move covers 0.1 and then receives uniform noise in
    ``[-0.01, 0.01]^2`` before clipping to the square.
    """

    discount = 0.99
    n_actions = N_ACTIONS
    step_size = 0.1
    noise_half_width = 0.01
    goal_radius = 0.1
    start_low, start_high = 0.45, 0.55

    # (dx, dy) per action
    deltas = np.array([[0.0, -1.0], [0.0, 1.0], [-1.0, 0.0], [1.0, 0.0]])
    corners = {"TL": (0.0, 0.0), "TR": (1.0, 0.0), "BL": (0.0, 1.0), "BR": (1.0, 1.0)}

    def __init__(self, schedule: TaskSchedule = None, rng_seed=None, noise: bool = True):
        self.schedule = default_prediction_schedule() if schedule is None else schedule
        _check_grid_schedule(self.schedule)
        self.rng = np.random.default_rng(rng_seed)
        self.noise = noise
        self.task = self.schedule.tasks[0]
        self.state = np.array([0.5, 0.5])
        self.needs_reset = True

    def set_task(self, task: GridTask) -> None:
        self.task = task

    def goal_at(self, pos) -> str | None:
        x, y = float(pos[0]), float(pos[1])
        for g, (cx, cy) in self.corners.items():
            if abs(x - cx) + abs(y - cy) <= self.goal_radius:
                return g
        return None

    def reset(self, rng=None) -> np.ndarray:
        rng = self.rng if rng is None else rng
        self.state = rng.uniform(self.start_low, self.start_high, size=2)
        self.needs_reset = False
        return self.state.copy()

    def step(self, action: int, rng=None):
        if self.needs_reset:
            raise UsageError("episode has terminated; call reset() before stepping again")
        rng = self.rng if rng is None else rng
        nxt = self.state + self.step_size * self.deltas[action]
        if self.noise:
            nxt = nxt + rng.uniform(-self.noise_half_width, self.noise_half_width, size=2)
        nxt = np.clip(nxt, 0.0, 1.0)
        goal = self.goal_at(nxt)
        terminal = goal is not None
        reward = self.task.reward_for(goal) if terminal else 0.0
        self.state = nxt
        self.needs_reset = terminal
        return reward, nxt.copy(), terminal, False
