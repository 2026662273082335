"""The 6x6 control grid with two neighbouring goals whose rewards swap."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from ..core_mdp import MdpModel
from ..errors import ConfigError, UsageError
from .grids import DOWN, LEFT, MOVES, N_ACTIONS, RIGHT, UP
from .schedule import GridTask, TaskSchedule

GOAL_TOKENS = ("G1", "G2")
VALID_TOKENS = {".", "#", "S", *GOAL_TOKENS}
PERPENDICULAR = {UP: (LEFT, RIGHT), DOWN: (LEFT, RIGHT), LEFT: (UP, DOWN), RIGHT: (UP, DOWN)}
SUCCESS_PROB = 0.9


def parse_layout(text: str) -> list[list[str]]:
    rows = [line.split() for line in text.splitlines() if line.strip()]
    if not rows:
        raise ConfigError("layout is empty")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ConfigError(f"layout row {i} has {len(row)} cells, expected {width}")
        bad = set(row) - VALID_TOKENS
        if bad:
            raise ConfigError(f"layout row {i} has unknown tokens {sorted(bad)}")
    flat = [tok for row in rows for tok in row]
    for tok in ("S", *GOAL_TOKENS):
        if flat.count(tok) != 1:
            raise ConfigError(f"layout must contain exactly one {tok!r}, found {flat.count(tok)}")
    return rows


def default_layout_text() -> str:
    return resources.files("ptvalue.environments").joinpath("data/control_grid.txt").read_text()


def control_tasks() -> tuple:
    return (
        GridTask(goal_rewards={"G1": 1.0, "G2": -1.0}, name="task1"),
        GridTask(goal_rewards={"G1": -1.0, "G2": 1.0}, name="task2"),
    )


def default_control_schedule(switch_every: int = 50, **kwargs) -> TaskSchedule:
    return TaskSchedule(tasks=control_tasks(), switch_every=switch_every, **kwargs)


class ControlGrid:
    """Gridworld with slippery moves: the chosen action happens 90% of the time,
    otherwise one of its two perpendicular actions (5% each).

    Blocked moves (walls, obstacles, the border) leave the agent in place.
    Episodes end at either goal; they are truncated after ``max_steps``.
    """

    discount = 0.95
    n_actions = N_ACTIONS

    def __init__(self, schedule: TaskSchedule = None, rng_seed=None, layout: str | Path | None = None,
                 max_steps: int = 1000):
        self.schedule = default_control_schedule() if schedule is None else schedule
        for task in self.schedule.tasks:
            if set(getattr(task, "goal_rewards", {})) != set(GOAL_TOKENS):
                raise ConfigError(f"control tasks must supply rewards for goals {GOAL_TOKENS}")
        if layout is None:
            text = default_layout_text()
        elif isinstance(layout, Path) or (isinstance(layout, str) and "\n" not in layout):
            text = Path(layout).read_text()
        else:
            text = layout
        self.layout = parse_layout(text)
        self.n_rows, self.n_cols = len(self.layout), len(self.layout[0])
        self.n_states = self.n_rows * self.n_cols
        self.walls = np.zeros(self.n_states, dtype=bool)
        self.goal_states = {}
        for r, row in enumerate(self.layout):
            for c, tok in enumerate(row):
                s = r * self.n_cols + c
                if tok == "#":
                    self.walls[s] = True
                elif tok == "S":
                    self.start_state = s
                elif tok in GOAL_TOKENS:
                    self.goal_states[tok] = s
        self.terminal_mask = np.zeros(self.n_states, dtype=bool)
        self.terminal_mask[list(self.goal_states.values())] = True
        self.next_table = self._build_next_table()
        self.max_steps = int(max_steps)
        self.rng = np.random.default_rng(rng_seed)
        self.task = None
        self._goal_reward = np.zeros(self.n_states)
        self.set_task(self.schedule.tasks[0])
        self.state = self.start_state
        self.steps = 0
        self.needs_reset = True

    def _build_next_table(self) -> np.ndarray:
        table = np.empty((self.n_states, N_ACTIONS), dtype=np.int64)
        for s in range(self.n_states):
            r, c = divmod(s, self.n_cols)
            for a, (dr, dc) in enumerate(MOVES):
                nr, nc = r + dr, c + dc
                inside = 0 <= nr < self.n_rows and 0 <= nc < self.n_cols
                nxt = nr * self.n_cols + nc if inside else s
                table[s, a] = s if self.walls[nxt] else nxt
        return table

    def set_task(self, task: GridTask) -> None:
        if task is self.task:
            return
        self.task = task
        self._goal_reward = self.goal_reward_vector(task)

    def goal_reward_vector(self, task: GridTask) -> np.ndarray:
        out = np.zeros(self.n_states)
        for g, s in self.goal_states.items():
            out[s] = task.reward_for(g)
        return out

    def reset(self, rng=None) -> int:
        self.state = self.start_state
        self.steps = 0
        self.needs_reset = False
        return self.state

    def effective_action(self, action: int, u: float) -> int:
        if u < SUCCESS_PROB:
            return action
        first, second = PERPENDICULAR[action]
        return first if u < 0.5 * (1.0 + SUCCESS_PROB) else second

    def step(self, action: int, rng=None):
        if self.needs_reset:
            raise UsageError("episode has terminated; call reset() before stepping again")
        rng = self.rng if rng is None else rng
        moved = self.effective_action(action, rng.random())
        nxt = int(self.next_table[self.state, moved])
        terminal = bool(self.terminal_mask[nxt])
        reward = float(self._goal_reward[nxt]) if terminal else 0.0
        self.state = nxt
        self.steps += 1
        truncated = not terminal and self.steps >= self.max_steps
        self.needs_reset = terminal or truncated
        return reward, nxt, terminal, truncated

    def mdp(self, task: GridTask) -> MdpModel:
        """Episodic MDP of ``task`` including the slip dynamics; goals absorb."""
        n = self.n_states
        P = np.zeros((n, N_ACTIONS, n))
        R = np.zeros((n, N_ACTIONS, n))
        goal_r = self.goal_reward_vector(task)
        side = 0.5 * (1.0 - SUCCESS_PROB)
        for s in range(n):
            for a in range(N_ACTIONS):
                if self.terminal_mask[s] or self.walls[s]:
                    P[s, a, s] = 1.0
                    continue
                first, second = PERPENDICULAR[a]
                for moved, p in ((a, SUCCESS_PROB), (first, side), (second, side)):
                    P[s, a, self.next_table[s, moved]] += p
                R[s, a] = goal_r
        R[:, :, :] *= (~self.terminal_mask)[:, None, None]
        start = np.zeros(n)
        start[self.start_state] = 1.0
        return MdpModel(transition=P, reward=R, discount=self.discount, start_dist=start,
                        terminal=self.terminal_mask, name=f"control-grid-{task.name}")
