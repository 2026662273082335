"""Property suites that check the decomposition's theory numerically.

Each suite returns a :class:`SuiteReport` with the measured quantities, the
tolerances they are held to, and an overall verdict. ``quick=True`` shrinks
sample counts for smoke tests; the defaults are the full-size checks.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..analysis.analytic import analytic_curve, initial_state, simulate_batched_td, switch_curves
from ..analysis.theory import (
    adaptation_error,
    family_crossover_bound,
    jumpstart_argmin,
    permanent_fixed_point_run,
    retention_curve,
    td_pt_max_deviation,
)
from ..core_mdp import (
    MdpModel,
    MrpModel,
    exact_value,
    modified_mrp,
    reduce_mdp,
    transient_fixed_point,
    transient_operator_apply,
)
from ..environments import epsilon_task_family
from ..errors import ConfigError


@dataclass
class SuiteReport:
    suite: str
    passed: bool
    measurements: dict
    tolerances: dict
    seconds: float = 0.0
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"suite": self.suite, "passed": bool(self.passed), "measurements": self.measurements,
                "tolerances": self.tolerances, "seconds": round(self.seconds, 3), "notes": self.notes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)


def random_mrp(rng: np.random.Generator, n: int, discount=None) -> MrpModel:
    P = rng.random((n, n)) + 0.05
    P /= P.sum(axis=1, keepdims=True)
    g = rng.uniform(0.5, 0.95) if discount is None else discount
    return MrpModel(transition=P, reward=rng.normal(size=n), discount=g, reward_variance=rng.random(n))


def random_episodic_mdp(rng: np.random.Generator, n: int, n_actions: int):
    """Random MDP whose last state is absorbing, with a random stochastic policy."""
    P = rng.random((n, n_actions, n)) * (rng.random((n, n_actions, n)) < 0.7) + 1e-3
    P[-1] = 0.0
    P[-1, :, -1] = 1.0
    P /= P.sum(axis=2, keepdims=True)
    R = rng.normal(size=(n, n_actions))
    R[-1] = 0.0
    term = np.zeros(n, dtype=bool)
    term[-1] = True
    pi = rng.random((n, n_actions)) + 0.1
    pi /= pi.sum(axis=1, keepdims=True)
    return MdpModel(transition=P, reward=R, discount=rng.uniform(0.5, 0.99), terminal=term), pi


def three_state_mrp() -> MrpModel:
    P = np.array([[0.1, 0.6, 0.3], [0.4, 0.2, 0.4], [0.5, 0.3, 0.2]])
    return MrpModel(transition=P, reward=[1.0, -0.5, 2.0], discount=0.9, reward_variance=[0.5, 0.1, 1.0],
                    name="three-state")


def suite_thm1(quick=False, seed=0) -> SuiteReport:
    """PT with a frozen permanent part tracks TD started at that permanent part."""
    rng = np.random.default_rng(seed)
    n_mrps, n_steps = (10, 1000) if quick else (100, 10_000)
    worst = 0.0
    for _ in range(n_mrps):
        n = int(rng.integers(3, 11))
        m = random_mrp(rng, n)
        worst = max(worst, td_pt_max_deviation(m, rng.normal(size=n) * 3, n_steps, 0.1, rng))
    tol = 1e-12
    return SuiteReport("thm1", worst <= tol, {"max_deviation": worst, "n_mrps": n_mrps, "n_steps": n_steps},
                       {"max_deviation": tol})


def suite_thm2(quick=False, seed=0) -> SuiteReport:
    """Transient operator is a sup-norm contraction with modulus gamma."""
    rng = np.random.default_rng(seed)
    draws = 100 if quick else 1000
    worst_excess = -np.inf
    worst_ratio = 0.0
    for _ in range(draws):
        m = random_mrp(rng, int(rng.integers(1, 11)))
        vp = rng.normal(size=m.n_states)
        u, v = rng.normal(size=(2, m.n_states)) * 10
        gap = np.abs(u - v).max()
        lhs = np.abs(transient_operator_apply(m, vp, u) - transient_operator_apply(m, vp, v)).max()
        worst_ratio = max(worst_ratio, lhs / gap / m.discount)
        worst_excess = max(worst_excess, lhs - m.discount * gap)
    return SuiteReport("thm2", worst_excess <= 1e-12,
                       {"max_ratio_over_gamma": worst_ratio, "max_excess": worst_excess, "draws": draws},
                       {"max_excess": 1e-12})


def transient_iteration(mrp: MrpModel, permanent, tol: float = 1e-10, max_sweeps: int = 100_000):
    """Synchronous transient-operator iteration from zero; returns (estimate, per-sweep contraction rates).

    Rates are recorded only while successive gaps are well above rounding
    noise, so that their ratio is accurate to far better than 1e-9.
    """
    v = np.zeros(mrp.n_states)
    rates = []
    prev_gap = None
    scale = 1.0 + np.abs(mrp.reward).max() / (1 - mrp.discount) + np.abs(permanent).max()
    for _ in range(max_sweeps):
        nxt = transient_operator_apply(mrp, permanent, v)
        gap = np.abs(nxt - v).max()
        if prev_gap is not None and prev_gap > 1e-4 * scale:
            rates.append(gap / prev_gap)
        prev_gap = gap
        v = nxt
        if gap <= tol * (1 - mrp.discount):
            break
    return v, np.array(rates)


def suite_thm3(quick=False, seed=0) -> SuiteReport:
    """Iterating the transient operator converges to the value minus the permanent part."""
    rng = np.random.default_rng(seed)
    n_mrps = 10 if quick else 50
    err, rate_excess = 0.0, -np.inf
    for _ in range(n_mrps):
        m = random_mrp(rng, int(rng.integers(2, 11)))
        vp = rng.normal(size=m.n_states) * 2
        v, rates = transient_iteration(m, vp)
        err = max(err, np.abs(v - (exact_value(m) - vp)).max())
        if rates.size:
            rate_excess = max(rate_excess, rates.max() - m.discount)
    ok = err <= 1e-8 and rate_excess <= 1e-9
    return SuiteReport("thm3", ok, {"max_fixed_point_error": err, "max_rate_minus_gamma": rate_excess,
                                    "n_mrps": n_mrps},
                       {"max_fixed_point_error": 1e-8, "max_rate_minus_gamma": 1e-9})


def suite_thm4(quick=False, seed=0) -> SuiteReport:
    """Transient fixed point equals the policy-averaged value of the triple-state MRP.

    Episodic instances only. Each triple's value is also compared with its
    closed form ``R(s, a) + gamma * v(s') - V_P(s)``.
    """
    rng = np.random.default_rng(seed)
    n_cases = 20 if quick else 200
    avg_err, triple_err = 0.0, 0.0
    for _ in range(n_cases):
        n = int(rng.integers(2, 6))
        mdp, pi = random_episodic_mdp(rng, n, 2)
        mrp = reduce_mdp(mdp, pi)
        v = exact_value(mrp)
        vp = rng.normal(size=n)
        tm = modified_mrp(mdp, pi, vp)
        values = exact_value(tm.mrp)
        R = mdp.expected_reward()
        avg = np.zeros(n)
        for i, (s, a, t) in enumerate(tm.triples):
            triple_err = max(triple_err, abs(values[i] - (R[s, a] + mdp.discount * v[t] - vp[s])))
            avg[s] += pi[s, a] * mdp.transition[s, a, t] * values[i]
        avg_err = max(avg_err, np.abs(avg - transient_fixed_point(mrp, vp)).max())
    tol = 1e-8
    return SuiteReport("thm4", avg_err <= tol and triple_err <= tol,
                       {"max_average_error": avg_err, "max_triple_error": triple_err, "n_cases": n_cases},
                       {"max_average_error": tol, "max_triple_error": tol})


def suite_thm5(quick=False, seed=1) -> SuiteReport:
    """Consolidation over i.i.d. task draws reaches the mean task value."""
    draws = 2000 if quick else 10_000
    tol = 3e-2 if quick else 1e-2
    errors = {}
    for eps in (0.5, 1.0, 2.0):
        family = epsilon_task_family(eps, rng_seed=0)
        mean_v = np.mean([exact_value(m) for m in family], axis=0)
        theta = permanent_fixed_point_run(family, draws, np.random.default_rng(seed))
        errors[f"eps={eps}"] = float(np.abs(theta - mean_v).max())
    return SuiteReport("thm5", max(errors.values()) <= tol, {"sup_error": errors, "draws": draws},
                       {"sup_error": tol})


def gradient_descent_minimizer(values, probs, step=0.5, tol=1e-13, max_iter=100_000) -> np.ndarray:
    """Plain gradient descent on the expected half squared distance, from zero."""
    u = np.zeros(values.shape[1])
    for _ in range(max_iter):
        grad = u - probs @ values
        if np.abs(grad).max() <= tol:
            break
        u = u - step * grad
    return u


def suite_thm6(quick=False, seed=0) -> SuiteReport:
    """The closed-form jumpstart minimizer agrees with gradient descent."""
    rng = np.random.default_rng(seed)
    n_families = 20
    worst = 0.0
    for _ in range(n_families):
        k, n = int(rng.integers(2, 11)), int(rng.integers(2, 11))
        values = rng.normal(size=(k, n)) * rng.uniform(0.5, 5)
        probs = rng.dirichlet(np.ones(k))
        worst = max(worst, np.abs(jumpstart_argmin(values, probs) - gradient_descent_minimizer(values, probs)).max())
    tol = 1e-6
    return SuiteReport("thm6", worst <= tol, {"max_abs_difference": worst, "n_families": n_families},
                       {"max_abs_difference": tol})


def suite_thm7(quick=False, seed=0, n_samples=10, alpha=0.1, epsilon=1.0) -> SuiteReport:
    """TD's error to an old task crosses the permanent error no later than the analytic bound."""
    rng = np.random.default_rng(seed)
    family = epsilon_task_family(epsilon, rng_seed=0)
    trials = 100 if quick else 1000
    bound = family_crossover_bound(family)
    steps = int(np.ceil(bound)) + 20
    within, crossings = 0, []
    for _ in range(trials):
        i = int(rng.integers(len(family)))
        curve = retention_curve(family, i, steps, rng, n_samples=n_samples, alpha=alpha)
        crossings.append(curve.crossover)
        within += curve.crossover <= curve.bound
    frac = within / trials
    return SuiteReport("thm7", frac >= 0.95,
                       {"fraction_within_bound": frac, "family_bound": bound,
                        "median_crossover": float(np.median(crossings)), "trials": trials},
                       {"fraction_within_bound": 0.95},
                       notes={"n_samples": n_samples, "alpha": alpha, "epsilon": epsilon})


def suite_thm8(quick=False, seed=0) -> SuiteReport:
    """On a fresh task PT (starting from the task mean) is no worse than TD (from the old task)."""
    rng = np.random.default_rng(seed)
    family = epsilon_task_family(1.0, rng_seed=0)
    steps = 50
    pt, td, pt_se, td_se = adaptation_error(family, steps, rng, n_seeds=30 if quick else 200)
    slack = td - pt + 3 * np.sqrt(pt_se**2 + td_se**2)
    ok = bool(np.all(slack >= 0) and pt[0] < td[0])
    return SuiteReport("thm8", ok, {"min_slack": float(slack.min()), "initial_pt": float(pt[0]),
                                    "initial_td": float(td[0]), "final_pt": float(pt[-1]),
                                    "final_td": float(td[-1])},
                       {"min_slack": 0.0})


def analytic_vs_simulation(mrp: MrpModel, n_samples: int, alpha: float, n_rounds: int, n_runs: int,
                           rng: np.random.Generator):
    v = exact_value(mrp)
    m0 = np.zeros(mrp.n_states)
    xi = analytic_curve(initial_state(m0, v, n_samples, alpha), mrp, v, n_rounds)
    mean, se = simulate_batched_td(mrp, m0, n_samples, alpha, n_rounds, n_runs, rng)
    return xi, mean, se


def suite_analytic_mse(quick=False, seed=0) -> SuiteReport:
    """The moment recursion matches simulated batched TD, and PT <= TD <= TD-reset after a switch."""
    n_runs = 20_000 if quick else 200_000
    tol = 0.05 if quick else 0.02
    family = epsilon_task_family(1.0, rng_seed=0)
    cases = {"three-state": (three_state_mrp(), 4, 0.05), "family-task": (family[0], 10, 0.01)}
    rel = {}
    for j, (name, (mrp, N, alpha)) in enumerate(cases.items()):
        xi, mean, _ = analytic_vs_simulation(mrp, N, alpha, 50, n_runs, np.random.default_rng(seed + j))
        rel[name] = float((np.abs(mean - xi) / xi)[5:51].max())
    curves = switch_curves(family, 10, 0.01, 50)
    order_ok = bool(np.all(curves["PT"] <= curves["TD"]) and np.all(curves["TD"] <= curves["TD-reset"]))
    return SuiteReport("analytic-mse", max(rel.values()) <= tol and order_ok,
                       {"max_relative_deviation": rel, "ordering_holds": order_ok, "n_runs": n_runs},
                       {"max_relative_deviation": tol})


def suite_fixed_points(quick=False, seed=0) -> SuiteReport:
    """Bellman residuals, the decomposition identity and transient fixed-point consistency."""
    rng = np.random.default_rng(seed)
    n = 50 if quick else 500
    resid = ident = consist = 0.0
    for _ in range(n):
        m = random_mrp(rng, int(rng.integers(1, 11)))
        v = exact_value(m)
        vp = rng.normal(size=m.n_states) * 3
        vt = transient_fixed_point(m, vp)
        I = np.eye(m.n_states)
        resid = max(resid, np.abs((I - m.discount * m.transition) @ v - m.reward).max())
        ident = max(ident, np.abs(vp + vt - v).max())
        consist = max(consist, np.abs(transient_operator_apply(m, vp, vt) - vt).max())
    tol = 1e-10
    return SuiteReport("fixed-points", max(resid, ident, consist) <= tol,
                       {"bellman_residual": resid, "decomposition_identity": ident,
                        "transient_consistency": consist, "n_mrps": n},
                       {"all": tol})


SUITES: dict[str, Callable[..., SuiteReport]] = {
    "thm1": suite_thm1,
    "thm2": suite_thm2,
    "thm3": suite_thm3,
    "thm4": suite_thm4,
    "thm5": suite_thm5,
    "thm6": suite_thm6,
    "thm7": suite_thm7,
    "thm8": suite_thm8,
    "analytic-mse": suite_analytic_mse,
    "fixed-points": suite_fixed_points,
}


def verify(suite: str, quick: bool = False) -> SuiteReport:
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    t0 = time.perf_counter()
    report = SUITES[suite](quick=quick)
    report.seconds = time.perf_counter() - t0
    return report
