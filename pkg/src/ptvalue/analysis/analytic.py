"""Exact mean / second-moment / MSE recursions for batched tabular TD.

Each round draws ``N`` i.i.d. samples ``s ~ d``, ``s' ~ P(s, .)`` and a reward
with mean ``r(s)`` and variance ``c(s)`` (independent of ``s'`` given ``s``),
accumulates the TD errors of all samples against the current estimate, and
applies them at the end of the round. Over the randomness of the samples the
estimate has mean ``m`` and second moment ``Sigma[s, x] = E[V(s) V(x)]``; both
evolve in closed form, and so does the expected squared error ``xi`` to a fixed
target vector.

The permanent/transient learner with a frozen permanent part follows the same
recursion started from the permanent estimate (its summed estimate is TD
started there), so one implementation serves both algorithm tags.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..core_mdp import MrpModel, exact_value, stationary_distribution
from ..errors import ConfigError, NumericalError

MAX_STATES = 15
SYMMETRY_TOL = 1e-10
ALGOS = ("TD", "PT")


@dataclass(frozen=True)
class AnalyticMseState:
    m: np.ndarray
    Sigma: np.ndarray
    xi: float
    algo: str = "TD"
    n_samples: int = 1
    alpha: float = 0.01

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ConfigError(f"algo must be one of {ALGOS}")
        if self.m.shape[0] > MAX_STATES:
            raise ConfigError(f"analytic engine supports at most {MAX_STATES} states")


def initial_state(m0, truth, n_samples: int, alpha: float, algo: str = "TD", Sigma0=None) -> AnalyticMseState:
    """State for a deterministic start ``m0`` (or a random start with second moment ``Sigma0``)."""
    m0 = np.asarray(m0, dtype=float)
    Sigma0 = np.outer(m0, m0) if Sigma0 is None else np.asarray(Sigma0, dtype=float)
    return AnalyticMseState(
        m=m0.copy(),
        Sigma=Sigma0.copy(),
        xi=error_from_moments(m0, Sigma0, truth),
        algo=algo,
        n_samples=int(n_samples),
        alpha=float(alpha),
    )


def error_from_moments(m, Sigma, truth) -> float:
    """``sum_s E[(V(s) - v(s))^2]`` written in terms of the moments."""
    truth = np.asarray(truth, dtype=float)
    return float(np.sum(truth**2 - 2.0 * truth * m + np.diag(Sigma)))


def omega_psi(mrp: MrpModel, d: np.ndarray, m: np.ndarray, Sigma: np.ndarray, N: int):
    """The first- and second-order increments of the second-moment recursion."""
    P, g = mrp.transition, mrp.discount
    r, c = mrp.reward, mrp.reward_variance
    n = mrp.n_states
    A = g * P - np.eye(n)
    PS = P @ Sigma  # PS[x, s] = sum_y P(x, y) Sigma(y, s)
    # Omega(s, x) = E[V(s) U(x)] + E[U(s) V(x)] with U the accumulated correction
    cross = N * d[None, :] * (np.outer(m, r) + g * PS.T - Sigma)
    omega = cross + cross.T
    Am = A @ m
    pair = np.outer(r, r) + np.outer(r, Am) + np.outer(Am, r) + A @ Sigma @ A.T
    psi = N * (N - 1) * np.outer(d, d) * pair
    same = (
        c
        + r**2
        + 2.0 * g * r * (P @ m)
        - 2.0 * r * m
        + g**2 * (P @ np.diag(Sigma))
        - 2.0 * g * np.diag(PS)
        + np.diag(Sigma)
    )
    psi = psi + np.diag(N * d * same)
    return omega, psi


def analytic_step(state: AnalyticMseState, mrp: MrpModel, truth, d=None) -> AnalyticMseState:
    """Advance the moments by one batched round."""
    Sigma, m = state.Sigma, state.m
    if np.abs(Sigma - Sigma.T).max() > SYMMETRY_TOL * max(1.0, np.abs(Sigma).max()):
        raise NumericalError("second-moment matrix is not symmetric")
    if state.alpha == 0:
        return state
    d = stationary_distribution(mrp) if d is None else d
    truth = np.asarray(truth, dtype=float)
    N, alpha = state.n_samples, state.alpha
    delta = mrp.reward + mrp.discount * (mrp.transition @ m) - m
    omega, psi = omega_psi(mrp, d, m, Sigma, N)
    m_next = m + alpha * N * d * delta
    Sigma_next = Sigma + alpha * omega + alpha**2 * psi
    Sigma_next = 0.5 * (Sigma_next + Sigma_next.T)
    xi_next = state.xi + float(
        np.sum(-2.0 * alpha * N * d * truth * delta + alpha * np.diag(omega) + alpha**2 * np.diag(psi))
    )
    if not (np.all(np.isfinite(Sigma_next)) and np.isfinite(xi_next)):
        raise NumericalError("analytic recursion produced non-finite moments")
    return replace(state, m=m_next, Sigma=Sigma_next, xi=xi_next)


def analytic_curve(state: AnalyticMseState, mrp: MrpModel, truth, n_rounds: int) -> np.ndarray:
    """``xi`` after 0, 1, ..., ``n_rounds`` rounds."""
    d = stationary_distribution(mrp)
    out = [state.xi]
    for _ in range(n_rounds):
        state = analytic_step(state, mrp, truth, d)
        out.append(state.xi)
    return np.array(out)


def simulate_batched_td(mrp: MrpModel, m0, n_samples: int, alpha: float, n_rounds: int,
                        n_runs: int, rng: np.random.Generator, truth=None, chunk: int = 50_000):
    """Monte-Carlo estimate of the squared error curve for independent batched-TD runs.

    Returns ``(mean, standard_error)`` of ``sum_s (V(s) - v(s))^2`` per round.
    """
    truth = exact_value(mrp) if truth is None else np.asarray(truth, dtype=float)
    d = stationary_distribution(mrp)
    cum_d = np.cumsum(d)
    cum_P = np.cumsum(mrp.transition, axis=1)
    noise_sd = np.sqrt(mrp.reward_variance)
    n, N = mrp.n_states, n_samples
    total = np.zeros(n_rounds + 1)
    total_sq = np.zeros(n_rounds + 1)
    done = 0
    while done < n_runs:
        R = min(chunk, n_runs - done)
        V = np.tile(np.asarray(m0, dtype=float), (R, 1))
        rows = np.arange(R)[:, None]
        err = ((V - truth) ** 2).sum(axis=1)
        total[0] += err.sum()
        total_sq[0] += (err**2).sum()
        for t in range(1, n_rounds + 1):
            s = np.minimum(np.searchsorted(cum_d, rng.random((R, N)) * cum_d[-1], side="right"), n - 1)
            u = rng.random((R, N))
            nxt = np.minimum((cum_P[s] < u[..., None] * cum_P[s, -1:]).sum(axis=-1), n - 1)
            rew = mrp.reward[s] + noise_sd[s] * rng.standard_normal((R, N))
            delta = rew + mrp.discount * V[rows, nxt] - V[rows, s]
            inc = np.zeros((R, n))
            np.add.at(inc, (np.broadcast_to(rows, s.shape), s), delta)
            V = V + alpha * inc
            err = ((V - truth) ** 2).sum(axis=1)
            total[t] += err.sum()
            total_sq[t] += (err**2).sum()
        done += R
    mean = total / n_runs
    var = np.maximum(total_sq / n_runs - mean**2, 0.0)
    return mean, np.sqrt(var / n_runs)


def switch_curves(family, n_samples: int, alpha: float, n_rounds: int, permanent=None):
    """Expected error after a task switch for PT, TD and TD-reset, by exact enumeration.

    TD starts from the previous task's true values, TD-reset from zero, and the
    permanent/transient learner from ``permanent`` (default: the task mean,
    which is where consolidation converges). Previous and new tasks are drawn
    independently and uniformly from ``family``.
    """
    values = [exact_value(m) for m in family]
    permanent = np.mean(values, axis=0) if permanent is None else np.asarray(permanent, dtype=float)
    K = len(family)
    d = stationary_distribution(family[0])
    curves = {"PT": np.zeros(n_rounds + 1), "TD": np.zeros(n_rounds + 1), "TD-reset": np.zeros(n_rounds + 1)}
    starts = {"PT": lambda i: permanent, "TD": lambda i: values[i], "TD-reset": lambda i: np.zeros_like(permanent)}
    for tau, mrp in enumerate(family):
        for i in range(K):
            for name, start in starts.items():
                algo = "PT" if name == "PT" else "TD"
                if name != "TD" and i > 0:
                    continue  # start does not depend on the previous task
                weight = 1.0 / K if name == "TD" else 1.0
                st = initial_state(start(i), values[tau], n_samples, alpha, algo)
                xs = [st.xi]
                for _ in range(n_rounds):
                    st = analytic_step(st, mrp, values[tau], d)
                    xs.append(st.xi)
                curves[name] += weight * np.array(xs) / K
    return curves
