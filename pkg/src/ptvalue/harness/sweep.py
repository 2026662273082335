"""Learning-rate sweeps selected by curve area, and the continual k/decay heatmap."""
from __future__ import annotations

import io
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..analysis.metrics import mean_ci
from ..errors import PtValueError
from .config import CONSUMED, ExperimentConfig
from .runner import format_value, parallel_map, run_seed

# default grid for the Q-learning reference column of a heatmap
REFERENCE_ALPHAS = (0.8, 0.5, 0.1, 0.05, 0.01, 0.005, 0.001)


class SweepFailure(PtValueError, RuntimeError):
    def __init__(self, point: dict, cause: BaseException):
        self.point = point
        super().__init__(f"sweep run failed at {point}: {type(cause).__name__}: {cause}")


@dataclass
class SweepResult:
    keys: tuple
    points: list  # tuples of grid values, in grid order
    aucs: np.ndarray  # (n_points, n_seeds)
    maximize: bool

    @property
    def means(self) -> np.ndarray:
        return self.aucs.mean(axis=1)

    @property
    def half_widths(self) -> np.ndarray:
        return np.array([mean_ci(a)[1] for a in self.aucs])

    @property
    def best_index(self) -> int:
        """Optimal mean AUC; exact ties go to the lexicographically smallest point."""
        means = self.means
        target = means.max() if self.maximize else means.min()
        tied = [i for i in range(len(self.points)) if means[i] == target]
        return min(tied, key=lambda i: self.points[i])

    @property
    def best(self) -> dict:
        return dict(zip(self.keys, self.points[self.best_index]))

    @property
    def best_mean(self) -> float:
        return float(self.means[self.best_index])

    def to_csv(self, out=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.keys + ("mean_auc", "ci_half_width", "n_seeds", "selected")) + "\n")
        best, hw = self.best_index, self.half_widths
        for i, p in enumerate(self.points):
            vals = [format_value(v) for v in p] + [
                format_value(float(self.means[i])), format_value(float(hw[i])), str(self.aucs.shape[1]),
                "1" if i == best else "0"]
            buf.write(",".join(vals) + "\n")
        return _emit(buf.getvalue(), out)


def _emit(text: str, out) -> str:
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            Path(out).parent.mkdir(parents=True, exist_ok=True)
            Path(out).write_text(text, encoding="utf-8", newline="")
    return text


def _seed_auc(cfg: ExperimentConfig, index: int) -> float:
    rows = run_seed(cfg, index)
    return float(np.sum([r.online_metric for r in rows]))


def grid_points(cfg: ExperimentConfig, grids: Optional[dict] = None) -> tuple:
    """Keys (in the algorithm's hyperparameter order) and the cartesian product of their grids."""
    grids = dict(cfg.sweep) if grids is None else grids
    keys = tuple(k for k in CONSUMED[cfg.algorithm] if k in grids)
    if not keys:
        raise PtValueError("sweep needs at least one grid")
    return keys, list(itertools.product(*(grids[k] for k in keys)))


def evaluate_points(cfg: ExperimentConfig, keys: tuple, points: list, jobs: int = 1) -> np.ndarray:
    configs = []
    for p in points:
        try:
            configs.append(cfg.with_hyperparameters(**dict(zip(keys, p))))
        except PtValueError as exc:
            raise SweepFailure(dict(zip(keys, p)), exc) from exc
    jobs_list = [(c, i) for c in configs for i in range(cfg.seeds)]
    try:
        flat = parallel_map(_seed_auc, jobs_list, jobs)
    except Exception as exc:
        # rerun serially to name the failing point
        for c, p in zip(configs, points):
            try:
                for i in range(cfg.seeds):
                    _seed_auc(c, i)
            except Exception as inner:
                raise SweepFailure(dict(zip(keys, p)), inner) from inner
        raise
    return np.array(flat, dtype=float).reshape(len(points), cfg.seeds)


def sweep(cfg: ExperimentConfig, jobs: Optional[int] = None, grids: Optional[dict] = None) -> SweepResult:
    """Run every grid point over the config's seeds and select by mean AUC.

    Prediction minimizes the online-error area; control maximizes the return area.
    """
    if cfg.seeds < 1:
        raise PtValueError("sweeps need at least one seed")
    keys, points = grid_points(cfg, grids)
    aucs = evaluate_points(cfg, keys, points, jobs or cfg.jobs)
    return SweepResult(keys, points, aucs, maximize=cfg.is_control)


@dataclass
class HeatmapResult:
    cells: dict  # (k, decay) -> SweepResult over the learning-rate grid
    reference: SweepResult  # Q-learning over its own step-size grid

    def to_csv(self, out=None) -> str:
        buf = io.StringIO()
        buf.write("k,decay,alpha,alpha_bar,mean_return_auc,ci_half_width,"
                  "q_reference_auc,q_reference_alpha,exceeds_reference\n")
        ref = self.reference.best_mean
        ref_alpha = self.reference.best["alpha"]
        for (k, decay), res in self.cells.items():
            best = res.best
            i = res.best_index
            vals = [k, decay, best.get("alpha"), best.get("alpha_bar"), float(res.means[i]),
                    float(res.half_widths[i]), ref, ref_alpha, res.best_mean > ref]
            buf.write(",".join(format_value(v) for v in vals) + "\n")
        return _emit(buf.getvalue(), out)

    def best_per_k(self) -> dict:
        """For each k, the best cell mean over the decay grid."""
        out = {}
        for (k, _), res in self.cells.items():
            out[k] = max(out.get(k, -np.inf), res.best_mean)
        return out


def kl_heatmap(cfg: ExperimentConfig, jobs: Optional[int] = None) -> HeatmapResult:
    """Best-learning-rate mean return for every (k, decay) cell, plus a tuned Q-learning reference."""
    if cfg.algorithm != "pt_q_crl" or not cfg.heatmap:
        raise PtValueError("heatmaps need a pt_q_crl config with a [heatmap] table")
    jobs = jobs or cfg.jobs
    cells = {}
    for k in cfg.heatmap["k"]:
        for decay in cfg.heatmap["decay"]:
            cell_cfg = cfg.with_hyperparameters(k=int(k), decay=float(decay))
            cells[(int(k), float(decay))] = sweep(cell_cfg, jobs)
    ref_cfg = ExperimentConfig(
        algorithm="q", environment=cfg.environment, layout=cfg.layout, max_steps=cfg.max_steps,
        episodes=cfg.episodes, seeds=cfg.seeds, base_seed=cfg.base_seed, switch_every=cfg.switch_every,
        boundary_visible=cfg.boundary_visible, order=cfg.order, schedule_seed=cfg.schedule_seed,
        hyperparameters={"epsilon": cfg.hyperparameters["epsilon"]},
        sweep={"alpha": tuple(cfg.heatmap.get("reference_alpha", REFERENCE_ALPHAS))})
    from .config import validate

    reference = sweep(validate(ref_cfg), jobs)
    return HeatmapResult(cells, reference)
