"""Executable versions of the fixed-point, jumpstart, retention and adaptation results."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..core_mdp import MrpModel, exact_value, stationary_distribution, transient_fixed_point
from ..errors import ConfigError, UsageError


def _family_values(family) -> np.ndarray:
    return np.array([exact_value(m) if isinstance(m, MrpModel) else np.asarray(m, float) for m in family])


def _probabilities(k: int, probs) -> np.ndarray:
    if probs is None:
        return np.full(k, 1.0 / k)
    p = np.asarray(probs, dtype=float)
    if p.shape != (k,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ConfigError("task probabilities must be a distribution over the family")
    return p


def jumpstart_value(u, family, probs=None) -> float:
    """``0.5 * E_tau ||u - v_tau||^2``."""
    values = _family_values(family)
    p = _probabilities(len(values), probs)
    u = np.asarray(u, dtype=float)
    return float(0.5 * np.sum(p * ((values - u) ** 2).sum(axis=1)))


def jumpstart_gradient(u, family, probs=None) -> np.ndarray:
    values = _family_values(family)
    p = _probabilities(len(values), probs)
    return np.asarray(u, dtype=float) - p @ values


def jumpstart_argmin(family, probs=None, check: bool = True) -> np.ndarray:
    """The minimizer of the jumpstart objective, the probability-weighted mean value."""
    values = _family_values(family)
    p = _probabilities(len(values), probs)
    u = p @ values
    if check:
        # central finite differences; the objective is quadratic so these are exact up to rounding
        h = 1e-3
        grad = np.empty_like(u)
        for j in range(u.size):
            e = np.zeros_like(u)
            e[j] = h
            grad[j] = (jumpstart_value(u + e, values, p) - jumpstart_value(u - e, values, p)) / (2 * h)
        if np.linalg.norm(grad) > 1e-8 * max(1.0, np.abs(values).max()):
            raise ArithmeticError(f"jumpstart stationarity check failed: |grad| = {np.linalg.norm(grad):.3g}")
    return u


def permanent_fixed_point_run(family, n_draws: int, rng: np.random.Generator, alpha_bar0: float = 0.5,
                              records_per_state: int = 2, probs=None):
    """Consolidate a tabular PT learner over i.i.d. task draws with ``alpha_bar0 / (1 + k)``.

    For each draw the transient part is set to its exact fixed point on the
    drawn task, the buffer holds every state ``records_per_state`` times, and
    one consolidation plus transient reset follows. Returns the final
    permanent values.
    """
    from ..features import tabular_features
    from ..learners.pt import PTLearner

    n = family[0].n_states
    p = _probabilities(len(family), probs)
    learner = PTLearner(
        tabular_features(n),
        alpha=1.0,
        alpha_bar=alpha_bar0,
        discount=family[0].discount,
        alpha_bar_schedule=lambda k: alpha_bar0 / (1.0 + k),
    )
    draws = rng.choice(len(family), size=n_draws, p=p)
    for tau in draws:
        learner.w = transient_fixed_point(family[tau], learner.theta)
        learner.buffer = [s for s in range(n) for _ in range(records_per_state)]
        learner.task_boundary()
    return learner.theta.copy()


def retention_constant(discount: float) -> float:
    """Per-step contraction factor used by the retention bound."""
    return float(np.exp(-(1.0 - discount**2) / 4.0))


def crossover_bound(values, i: int, permanent, discount: float, probs=None) -> float:
    """Step after which TD's error to the old task ``i`` must exceed the permanent error.

    ``np.inf`` when the bound does not exist (expected task distance not above
    the permanent error).
    """
    values = np.asarray(values, dtype=float)
    p = _probabilities(len(values), probs)
    dist = p @ ((values - values[i]) ** 2).sum(axis=1)
    D = float(((np.asarray(permanent) - values[i]) ** 2).sum())
    if dist <= D:
        return np.inf
    if D == 0.0:
        return 0.0
    return float(np.log((dist - D) / dist) / np.log(retention_constant(discount)))


def family_crossover_bound(family, permanent=None, probs=None) -> float:
    values = _family_values(family)
    permanent = jumpstart_argmin(values, probs, check=False) if permanent is None else permanent
    g = family[0].discount
    return max(crossover_bound(values, i, permanent, g, probs) for i in range(len(values)))


def batched_td_paths(family, starts, n_samples: int, alpha: float, n_rounds: int,
                     rng: np.random.Generator) -> np.ndarray:
    """One batched-TD sample path per family member, all sharing a transition matrix.

    ``starts[j]`` is the initial estimate for ``family[j]``. Returns the
    estimates with shape ``(n_rounds + 1, len(family), n_states)``.
    """
    P = family[0].transition
    n, K, N = P.shape[0], len(family), n_samples
    g = family[0].discount
    d = stationary_distribution(family[0])
    cum_d, cum_P = np.cumsum(d), np.cumsum(P, axis=1)
    rewards = np.array([m.reward for m in family])
    noise = np.sqrt(np.array([m.reward_variance for m in family]))
    V = np.array(starts, dtype=float)
    out = np.empty((n_rounds + 1, K, n))
    out[0] = V
    rows = np.arange(K)[:, None]
    for t in range(1, n_rounds + 1):
        s = np.minimum(np.searchsorted(cum_d, rng.random((K, N)) * cum_d[-1], side="right"), n - 1)
        u = rng.random((K, N))
        nxt = np.minimum((cum_P[s] < u[..., None] * cum_P[s, -1:]).sum(axis=-1), n - 1)
        rew = rewards[rows, s] + noise[rows, s] * rng.standard_normal((K, N))
        delta = rew + g * V[rows, nxt] - V[rows, s]
        inc = np.zeros((K, n))
        np.add.at(inc, (np.broadcast_to(rows, s.shape), s), delta)
        V = V + alpha * inc
        out[t] = V
    return out


@dataclass
class RetentionCurve:
    td_error: np.ndarray  # E_tau ||V_TD - v_i||^2 per step
    permanent_error: float  # D_i
    bound: float  # analytic crossover step k_i

    @property
    def crossover(self) -> float:
        """First step at which TD's error to the old task exceeds the permanent error."""
        above = np.flatnonzero(self.td_error[1:] > self.permanent_error)
        return float(above[0] + 1) if above.size else np.inf


def retention_curve(family, i: int, steps: int, rng: np.random.Generator, n_samples: int = 50,
                    alpha: float = 0.1, tasks: Optional[Sequence[int]] = None, permanent=None,
                    start=None) -> RetentionCurve:
    """TD started converged on task ``i``, then trained on each new task ``tau``.

    The error to ``v_i`` is averaged over the new tasks in ``tasks`` (default:
    all of them, uniformly, so the expectation over tasks is exact enumeration).
    """
    values = _family_values(family)
    start = values[i] if start is None else np.asarray(start, dtype=float)
    if np.abs(start - values[i]).max() > 1e-8:
        raise UsageError("retention curves need a learner converged on the old task")
    permanent = values.mean(axis=0) if permanent is None else np.asarray(permanent, dtype=float)
    tasks = list(range(len(values))) if tasks is None else list(tasks)
    members = [family[t] for t in tasks]
    paths = batched_td_paths(members, [start] * len(members), n_samples, alpha, steps, rng)
    td_error = ((paths - values[i]) ** 2).sum(axis=2).mean(axis=1)
    D = float(((permanent - values[i]) ** 2).sum())
    p = np.zeros(len(values))
    for t in tasks:
        p[t] += 1.0 / len(tasks)
    bound = crossover_bound(values, i, permanent, family[0].discount, p)
    return RetentionCurve(td_error=td_error, permanent_error=D, bound=bound)


def adaptation_error(family, steps: int, rng: np.random.Generator, n_seeds: int = 100,
                     n_samples: int = 10, alpha: float = 0.01, permanent=None):
    """Paired per-step errors to the new task for PT (from the task mean) and TD (from the old task).

    Previous and new tasks are drawn independently and uniformly. Both
    learners see identical samples. Returns ``(pt_mean, td_mean, pt_se, td_se)``.
    """
    values = _family_values(family)
    permanent = values.mean(axis=0) if permanent is None else np.asarray(permanent, dtype=float)
    K = len(values)
    pt_runs, td_runs = [], []
    for _ in range(n_seeds):
        old = int(rng.integers(K))
        new = int(rng.integers(K))
        state = rng.bit_generator.state
        pt = batched_td_paths([family[new]], [permanent], n_samples, alpha, steps, rng)[:, 0]
        rng.bit_generator.state = state
        td = batched_td_paths([family[new]], [values[old]], n_samples, alpha, steps, rng)[:, 0]
        pt_runs.append(((pt - values[new]) ** 2).sum(axis=1))
        td_runs.append(((td - values[new]) ** 2).sum(axis=1))
    pt_runs, td_runs = np.array(pt_runs), np.array(td_runs)
    sq = np.sqrt(n_seeds)
    return pt_runs.mean(0), td_runs.mean(0), pt_runs.std(0, ddof=1) / sq, td_runs.std(0, ddof=1) / sq


def td_pt_max_deviation(mrp: MrpModel, permanent, n_steps: int, alpha: float,
                        rng: np.random.Generator, start_state: int = 0) -> float:
    """Largest gap between tabular TD started at ``permanent`` and PT with that permanent part.

    Both learners see the same sampled transitions and step size; the PT
    transient part starts at zero and the permanent part is held fixed.
    """
    P = mrp.transition
    cum = np.cumsum(P, axis=1)
    sd = np.sqrt(mrp.reward_variance)
    g = mrp.discount
    theta = [float(x) for x in permanent]
    td = list(theta)
    w = [0.0] * mrp.n_states
    u = rng.random(n_steps)
    z = rng.standard_normal(n_steps)
    worst = 0.0
    s = start_state
    for t in range(n_steps):
        nxt = min(int(np.searchsorted(cum[s], u[t] * cum[s, -1], side="right")), mrp.n_states - 1)
        r = mrp.reward[s] + sd[s] * z[t]
        td[s] = td[s] + alpha * (r + g * td[nxt] - td[s])
        w[s] = w[s] + alpha * (r + g * (theta[nxt] + w[nxt]) - (theta[s] + w[s]))
        worst = max(worst, abs(theta[s] + w[s] - td[s]))
        s = nxt
    return worst
