"""Seeded execution of a config and CSV emission of the per-episode metrics."""
from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..core_mdp import exact_value
from ..environments import ControlGrid, DiscreteGrid, TaskSchedule, control_tasks, prediction_tasks
from ..learners.loops import MetricsRecord
from . import kernels
from .config import ExperimentConfig

METRIC_COLUMNS = ("seed", "step_or_episode", "task_id", "boundary", "online_metric", "offtask_mse")

_PREDICTION_CODES = {"td": kernels.TD, "td_reset": kernels.TD_RESET, "pt_td": kernels.PT}
_CONTROL_CODES = {"q": kernels.Q, "q_reset": kernels.Q_RESET, "pt_q": kernels.PT_Q, "pt_q_crl": kernels.PT_Q_CRL}


def seed_rng(base_seed: int, index: int) -> np.random.Generator:
    """Generator for run ``index``; a counter split, so adding runs never shifts earlier streams."""
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(index,)))


@dataclass(frozen=True)
class RunSetup:
    env: object
    episode_task: np.ndarray
    task_start: np.ndarray
    boundary_before: np.ndarray
    goal_rewards: np.ndarray
    eval_states: np.ndarray
    task_values: np.ndarray  # (n_tasks, n_eval); empty for control


def _setup_key(cfg: ExperimentConfig) -> tuple:
    return (cfg.environment, cfg.layout, cfg.max_steps, cfg.episodes, cfg.switch_every,
            cfg.boundary_visible, cfg.order, cfg.schedule_seed)


@lru_cache(maxsize=16)
def _build_setup(key: tuple) -> RunSetup:
    environment, layout, max_steps, episodes, switch_every, visible, order, sched_seed = key
    tasks = prediction_tasks() if environment == "discrete_grid" else control_tasks()
    schedule = TaskSchedule(tasks, switch_every=switch_every, unit="episode", boundary_visible=visible,
                            order=order, seed=sched_seed)
    if environment == "discrete_grid":
        env = DiscreteGrid(schedule)
        eval_states = np.flatnonzero(~env.terminal_mask)
        values = np.array([exact_value(env.induced_mrp(t))[eval_states] for t in schedule.tasks])
    else:
        env = ControlGrid(schedule, layout=layout, max_steps=max_steps)
        eval_states = np.zeros(0, dtype=np.int64)
        values = np.zeros((len(schedule.tasks), 0))
    episode_task = np.array([schedule.task_index_at(e) for e in range(episodes)], dtype=np.int64)
    task_start = np.array([schedule.is_task_start(e) for e in range(episodes)], dtype=np.bool_)
    goal = np.array([env.goal_reward_vector(t) for t in schedule.tasks])
    return RunSetup(env, episode_task, task_start, task_start & visible, goal, eval_states, values)


def setup_for(cfg: ExperimentConfig) -> RunSetup:
    return _build_setup(_setup_key(cfg))


def _missing(cfg: ExperimentConfig) -> list:
    return [k for k, v in cfg.hyperparameters.items() if v is None]


def _prediction_metrics(setup: RunSetup, online: np.ndarray, retained: np.ndarray):
    truth = setup.task_values[setup.episode_task]
    online_err = np.sqrt(np.mean((online - truth) ** 2, axis=1))
    n_tasks = setup.task_values.shape[0]
    per_task = np.mean((retained[:, None, :] - setup.task_values[None]) ** 2, axis=2)
    mask = np.ones_like(per_task, dtype=bool)
    mask[np.arange(len(per_task)), setup.episode_task] = False
    off = (per_task * mask).sum(axis=1) / (n_tasks - 1)
    return online_err, off


def _python_prediction(cfg: ExperimentConfig, setup: RunSetup, rng: np.random.Generator, index: int):
    from ..features import rowcol_features
    from ..learners import PTLearner, TDLearner
    from ..learners.loops import prediction_episode_loop

    hp = cfg.hyperparameters
    features = rowcol_features(5, 5)
    g = setup.env.discount
    if cfg.algorithm == "pt_td":
        learner = PTLearner(features, alpha=hp["alpha"], alpha_bar=hp["alpha_bar"], discount=g)
    else:
        learner = TDLearner(features, alpha=hp["alpha"], discount=g, reset_on_boundary=cfg.algorithm == "td_reset")
    env = DiscreteGrid(setup.env.schedule)
    return prediction_episode_loop(learner, env, cfg.episodes, rng, list(setup.eval_states),
                                   list(setup.task_values), seed=index)


def run_seed(cfg: ExperimentConfig, index: int) -> list[MetricsRecord]:
    """Metrics rows of run ``index`` (seeded from ``cfg.base_seed``)."""
    missing = _missing(cfg)
    if missing:
        from ..errors import ConfigError

        raise ConfigError(f"hyperparameters {missing} have no value; run a sweep or set them")
    setup = setup_for(cfg)
    rng = seed_rng(cfg.base_seed, index)
    hp = cfg.hyperparameters
    if cfg.episodes == 0:
        return []
    env = setup.env
    if cfg.is_control:
        returns, _, _ = kernels.control_kernel(
            env.next_table, env.terminal_mask, setup.goal_rewards, env.start_state, setup.episode_task,
            setup.boundary_before, _CONTROL_CODES[cfg.algorithm], hp["alpha"], hp.get("alpha_bar", 0.0) or 0.0,
            env.discount, hp["epsilon"], hp.get("k", 0) or 0, hp.get("decay", 0.0), cfg.max_steps, rng,
            hp.get("k_unit", "episode") == "step")
        online, off = returns, np.full(cfg.episodes, np.nan)
    elif cfg.features == "tabular":
        snap_on, snap_ret = kernels.prediction_kernel(
            env.next_table, env.terminal_mask, setup.goal_rewards, env.start_state, setup.episode_task,
            setup.boundary_before, _PREDICTION_CODES[cfg.algorithm], hp["alpha"], hp.get("alpha_bar", 0.0) or 0.0,
            env.discount, setup.eval_states, rng)
        online, off = _prediction_metrics(setup, snap_on, snap_ret)
    else:
        return _python_prediction(cfg, setup, rng, index)
    return [
        MetricsRecord(index, e, int(setup.episode_task[e]), bool(setup.task_start[e]), float(online[e]), float(off[e]))
        for e in range(cfg.episodes)
    ]


def _call(job):
    fn, args = job
    return fn(*args)


def parallel_map(fn: Callable, arg_list: Sequence[tuple], jobs: int = 1) -> list:
    """``[fn(*a) for a in arg_list]``, in input order, on up to ``jobs`` processes."""
    if jobs <= 1 or len(arg_list) <= 1:
        return [fn(*a) for a in arg_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_call, [(fn, a) for a in arg_list], chunksize=max(1, len(arg_list) // (4 * jobs))))


def run_records(cfg: ExperimentConfig, jobs: Optional[int] = None) -> list[list[MetricsRecord]]:
    """Rows of every seed, grouped by seed in index order."""
    return parallel_map(run_seed, [(cfg, i) for i in range(cfg.seeds)], jobs or cfg.jobs)


def seed_aucs(per_seed: Iterable[Sequence[MetricsRecord]]) -> np.ndarray:
    """Area under each seed's online-metric curve."""
    return np.array([float(np.sum([r.online_metric for r in rows])) for rows in per_seed])


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(per_seed: Iterable[Sequence[MetricsRecord]], cfg: ExperimentConfig, out) -> None:
    """Write the metrics CSV to a path or text stream."""
    hyper = cfg.hyper_columns()
    header = ",".join(METRIC_COLUMNS + hyper) + "\n"
    echo = "".join("," + format_value(cfg.hyperparameters[h]) for h in hyper)
    buf = io.StringIO()
    buf.write(header)
    for rows in per_seed:
        for r in rows:
            buf.write(",".join(format_value(getattr(r, c)) for c in METRIC_COLUMNS) + echo + "\n")
    text = buf.getvalue()
    if hasattr(out, "write"):
        out.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8", newline="")


def run(cfg: ExperimentConfig, out=None, jobs: Optional[int] = None) -> list[list[MetricsRecord]]:
    """Run every seed and, when ``out`` (or ``cfg.out``) is set, write the CSV there."""
    per_seed = run_records(cfg, jobs)
    target = out if out is not None else cfg.out
    if target is not None:
        write_csv(per_seed, cfg, target)
    return per_seed
