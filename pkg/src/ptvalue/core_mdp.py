"""Exact finite Markov reward/decision processes and their Bellman operators.

Everything here is ground truth for the learners and the analysis code, so it
is solved directly (LU) rather than iterated wherever possible.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConvergenceError, ModelError

STOCHASTIC_TOL = 1e-12


def _as_float_array(x, name: str, ndim: int) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.ndim != ndim:
        raise ModelError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _check_distribution(p: np.ndarray, name: str) -> None:
    if np.any(p < 0):
        raise ModelError(f"{name} has negative entries")
    if abs(p.sum() - 1.0) > STOCHASTIC_TOL * max(1, p.size):
        raise ModelError(f"{name} sums to {p.sum()!r}, expected 1")


@dataclass(frozen=True)
class MrpModel:
    """A Markov reward process under a fixed policy.

    ``reward[s]`` is the expected one-step reward from ``s`` and
    ``reward_variance[s]`` the variance of that reward. ``terminal`` marks
    absorbing states (self-loop, zero reward) when the process is episodic.
    """

    transition: np.ndarray
    reward: np.ndarray
    discount: float
    reward_variance: Optional[np.ndarray] = None
    start_dist: Optional[np.ndarray] = None
    terminal: Optional[np.ndarray] = None
    name: str = "mrp"

    def __post_init__(self):
        P = _as_float_array(self.transition, "transition", 2)
        n = P.shape[0]
        if P.shape != (n, n) or n < 1:
            raise ModelError(f"transition must be square, got shape {P.shape}")
        if np.any(P < 0):
            raise ModelError("transition has negative entries")
        row_err = np.abs(P.sum(axis=1) - 1.0).max()
        if row_err > STOCHASTIC_TOL:
            raise ModelError(f"transition rows must sum to 1 (max deviation {row_err:.3g})")
        r = _as_float_array(self.reward, "reward", 1)
        if r.shape != (n,):
            raise ModelError(f"reward has shape {r.shape}, expected ({n},)")
        if not 0.0 < float(self.discount) < 1.0:
            raise ModelError(f"discount must lie strictly inside (0, 1), got {self.discount}")
        c = np.zeros(n) if self.reward_variance is None else self.reward_variance
        c = _as_float_array(c, "reward_variance", 1)
        if c.shape != (n,) or np.any(c < 0):
            raise ModelError("reward_variance must be a nonnegative vector of length n_states")
        d0 = np.full(n, 1.0 / n) if self.start_dist is None else self.start_dist
        d0 = _as_float_array(d0, "start_dist", 1)
        if d0.shape != (n,):
            raise ModelError("start_dist must have length n_states")
        _check_distribution(d0, "start_dist")
        term = np.zeros(n, dtype=bool) if self.terminal is None else np.array(self.terminal, dtype=bool)
        if term.shape != (n,):
            raise ModelError("terminal mask must have length n_states")
        term.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "discount", float(self.discount))
        object.__setattr__(self, "reward_variance", c)
        object.__setattr__(self, "start_dist", d0)
        object.__setattr__(self, "terminal", term)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    def with_reward(self, reward, reward_variance=None, name=None) -> "MrpModel":
        return MrpModel(
            transition=self.transition,
            reward=reward,
            discount=self.discount,
            reward_variance=self.reward_variance if reward_variance is None else reward_variance,
            start_dist=self.start_dist,
            terminal=self.terminal,
            name=self.name if name is None else name,
        )


@dataclass(frozen=True)
class MdpModel:
    """A finite MDP. ``reward`` is either ``R(s, a)`` or ``R(s, a, s')``."""

    transition: np.ndarray
    reward: np.ndarray
    discount: float
    start_dist: Optional[np.ndarray] = None
    reward_variance: Optional[np.ndarray] = None
    terminal: Optional[np.ndarray] = None
    name: str = "mdp"

    def __post_init__(self):
        P = _as_float_array(self.transition, "transition", 3)
        n, n_actions, n2 = P.shape
        if n != n2 or n < 1 or n_actions < 1:
            raise ModelError(f"transition must have shape (S, A, S), got {P.shape}")
        if np.any(P < 0):
            raise ModelError("transition has negative entries")
        row_err = np.abs(P.sum(axis=2) - 1.0).max()
        if row_err > STOCHASTIC_TOL:
            raise ModelError(f"each (s, a) slice must sum to 1 (max deviation {row_err:.3g})")
        R = np.array(self.reward, dtype=float)
        if R.shape not in ((n, n_actions), (n, n_actions, n)):
            raise ModelError(f"reward has shape {R.shape}, expected (S, A) or (S, A, S)")
        R = _as_float_array(R, "reward", R.ndim)
        if not 0.0 < float(self.discount) < 1.0:
            raise ModelError(f"discount must lie strictly inside (0, 1), got {self.discount}")
        d0 = np.full(n, 1.0 / n) if self.start_dist is None else self.start_dist
        d0 = _as_float_array(d0, "start_dist", 1)
        if d0.shape != (n,):
            raise ModelError("start_dist must have length n_states")
        _check_distribution(d0, "start_dist")
        rv = np.zeros((n, n_actions)) if self.reward_variance is None else self.reward_variance
        rv = _as_float_array(rv, "reward_variance", 2)
        if rv.shape != (n, n_actions) or np.any(rv < 0):
            raise ModelError("reward_variance must be a nonnegative (S, A) table")
        term = np.zeros(n, dtype=bool) if self.terminal is None else np.array(self.terminal, dtype=bool)
        if term.shape != (n,):
            raise ModelError("terminal mask must have length n_states")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "discount", float(self.discount))
        object.__setattr__(self, "start_dist", d0)
        object.__setattr__(self, "reward_variance", rv)
        object.__setattr__(self, "terminal", term)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def expected_reward(self) -> np.ndarray:
        """``R(s, a)``, marginalizing over ``s'`` if rewards are transition-conditional."""
        if self.reward.ndim == 2:
            return self.reward
        return np.einsum("sat,sat->sa", self.transition, self.reward)

    def reward_second_moment(self) -> np.ndarray:
        """``E[R^2 | s, a]`` including the per-pair variance."""
        if self.reward.ndim == 2:
            return self.reward_variance + self.reward**2
        return self.reward_variance + np.einsum("sat,sat->sa", self.transition, self.reward**2)


def _check_vector(mrp: MrpModel, v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (mrp.n_states,):
        raise ModelError(f"{name} has shape {v.shape}, expected ({mrp.n_states},)")
    return v


def _check_policy(policy, n_states: int, n_actions: int) -> np.ndarray:
    pi = np.asarray(policy, dtype=float)
    if pi.shape != (n_states, n_actions):
        raise ModelError(f"policy has shape {pi.shape}, expected ({n_states}, {n_actions})")
    if np.any(pi < 0) or np.abs(pi.sum(axis=1) - 1.0).max() > STOCHASTIC_TOL:
        raise ModelError("policy rows must be probability vectors")
    return pi


def reduce_mdp(mdp: MdpModel, policy) -> MrpModel:
    """Marginalize the actions of ``mdp`` under a stochastic ``policy``."""
    pi = _check_policy(policy, mdp.n_states, mdp.n_actions)
    P = np.einsum("sa,sat->st", pi, mdp.transition)
    r = np.einsum("sa,sa->s", pi, mdp.expected_reward())
    second = np.einsum("sa,sa->s", pi, mdp.reward_second_moment())
    c = np.maximum(second - r**2, 0.0)
    return MrpModel(
        transition=P,
        reward=r,
        discount=mdp.discount,
        reward_variance=c,
        start_dist=mdp.start_dist,
        terminal=mdp.terminal,
        name=mdp.name,
    )


def bellman_apply(mrp: MrpModel, v) -> np.ndarray:
    """Expected TD target ``r + gamma P v``."""
    v = _check_vector(mrp, v, "v")
    return mrp.reward + mrp.discount * (mrp.transition @ v)


def exact_value(mrp: MrpModel) -> np.ndarray:
    """Solve ``(I - gamma P) v = r`` by a direct solve."""
    A = np.eye(mrp.n_states) - mrp.discount * mrp.transition
    v = np.linalg.solve(A, mrp.reward)
    residual = np.abs(A @ v - mrp.reward).max()
    scale = max(1.0, np.abs(mrp.reward).max())
    assert residual <= 1e-10 * scale, f"linear solve residual {residual:.3g} too large"
    return v


def transient_operator_apply(mrp: MrpModel, v_p, v_t) -> np.ndarray:
    """Expected target of the transient update with the permanent part held fixed.

    ``r + gamma P v_p - v_p + gamma P v_t``; a ``gamma``-contraction in ``v_t``.
    """
    v_p = _check_vector(mrp, v_p, "v_p")
    v_t = _check_vector(mrp, v_t, "v_t")
    P, g = mrp.transition, mrp.discount
    return mrp.reward + g * (P @ v_p) - v_p + g * (P @ v_t)


def transient_fixed_point(mrp: MrpModel, v_p) -> np.ndarray:
    """The part of the true value that ``v_p`` does not already capture."""
    v_p = _check_vector(mrp, v_p, "v_p")
    return exact_value(mrp) - v_p


def stationary_distribution(mrp: MrpModel, tol: float = 1e-12, max_iter: int = 10**6) -> np.ndarray:
    """Power iteration from the uniform vector until ``||dP - d||_1 <= tol``."""
    P = mrp.transition
    d = np.full(mrp.n_states, 1.0 / mrp.n_states)
    for _ in range(max_iter):
        nxt = d @ P
        nxt /= nxt.sum()
        if np.abs(nxt - d).sum() <= tol:
            return nxt
        d = nxt
    raise ConvergenceError(
        f"stationary distribution of {mrp.name!r} did not converge in {max_iter} iterations"
    )


def mdp_q_values(mdp: MdpModel, policy) -> np.ndarray:
    """Action values ``q_pi(s, a)`` of a fixed policy."""
    mrp = reduce_mdp(mdp, policy)
    v = exact_value(mrp)
    return mdp.expected_reward() + mdp.discount * np.einsum("sat,t->sa", mdp.transition, v)


def q_value_iteration(mdp: MdpModel, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Optimal action values by synchronous value iteration (sup-norm stopping rule)."""
    R = mdp.expected_reward()
    P, g = mdp.transition, mdp.discount
    q = np.zeros((mdp.n_states, mdp.n_actions))
    for _ in range(max_iter):
        nxt = R + g * np.einsum("sat,t->sa", P, q.max(axis=1))
        if np.abs(nxt - q).max() <= tol * (1 - g):
            return nxt
        q = nxt
    raise ConvergenceError(f"Q-value iteration on {mdp.name!r} did not converge")


@dataclass(frozen=True)
class TripleMrp:
    """The MRP over ``(s, a, s')`` triples together with its state labels."""

    mrp: MrpModel
    triples: list = field(default_factory=list)

    def index(self, s: int, a: int, s_next: int) -> int:
        return self.triples.index((s, a, s_next))


def modified_mrp(mdp: MdpModel, policy, v_p) -> TripleMrp:
    """Build the triple-state MRP whose value function encodes the transient fixed point.

    A triple ``x = (s, a, s')`` moves to ``(s', a', s'')`` with probability
    ``pi(a'|s') P(s''|s', a')`` and pays ``R(s, a) + gamma v_p(s') - v_p(s)``.
    Triples are enumerated in lexicographic order.
    """
    pi = _check_policy(policy, mdp.n_states, mdp.n_actions)
    v_p = np.asarray(v_p, dtype=float)
    if v_p.shape != (mdp.n_states,):
        raise ModelError("v_p must have length n_states")
    P, g = mdp.transition, mdp.discount
    R = mdp.expected_reward()
    triples = [
        (s, a, t)
        for s in range(mdp.n_states)
        for a in range(mdp.n_actions)
        for t in range(mdp.n_states)
        if P[s, a, t] > 0
    ]
    if not triples:
        raise ModelError("modified MRP has no reachable triples")
    index = {x: i for i, x in enumerate(triples)}
    n = len(triples)
    P_tilde = np.zeros((n, n))
    r_tilde = np.empty(n)
    start = np.empty(n)
    for i, (s, a, t) in enumerate(triples):
        r_tilde[i] = R[s, a] + g * v_p[t] - v_p[s]
        start[i] = mdp.start_dist[s] * pi[s, a] * P[s, a, t]
        for a2 in range(mdp.n_actions):
            for u in range(mdp.n_states):
                if P[t, a2, u] > 0:
                    P_tilde[i, index[(t, a2, u)]] += pi[t, a2] * P[t, a2, u]
    if start.sum() <= 0:
        start = np.full(n, 1.0 / n)
    else:
        start = start / start.sum()
    mrp = MrpModel(
        transition=P_tilde,
        reward=r_tilde,
        discount=g,
        start_dist=start,
        name=f"{mdp.name}-triples",
    )
    return TripleMrp(mrp=mrp, triples=triples)


def sample_next(mrp: MrpModel, s: int, rng: np.random.Generator) -> tuple[float, int]:
    """Draw ``(R, S')`` from state ``s``; reward noise is Gaussian and independent of ``S'``."""
    cum = np.cumsum(mrp.transition[s])
    nxt = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    nxt = min(nxt, mrp.n_states - 1)
    r = mrp.reward[s]
    if mrp.reward_variance[s] > 0:
        r = r + np.sqrt(mrp.reward_variance[s]) * rng.standard_normal()
    return float(r), nxt
