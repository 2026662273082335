"""Monte-Carlo ground truth for value functions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core_mdp import MrpModel


@dataclass
class MonteCarloEstimate:
    values: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray

    @property
    def missing(self) -> np.ndarray:
        """States never visited; they carry NaN and are excluded from comparisons."""
        return self.counts == 0

    def agrees_with(self, truth, n_se: float = 3.0, floor: float = 1e-12) -> np.ndarray:
        ok = ~self.missing
        diff = np.abs(self.values[ok] - np.asarray(truth)[ok])
        return diff <= n_se * self.stderr[ok] + floor


def _summarize(sums, sq_sums, counts) -> MonteCarloEstimate:
    counts = np.asarray(counts)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        var = np.where(counts > 1, (sq_sums - counts * mean**2) / np.maximum(counts - 1, 1), 0.0)
        se = np.where(counts > 0, np.sqrt(np.maximum(var, 0.0) / np.maximum(counts, 1)), np.nan)
    return MonteCarloEstimate(values=mean, stderr=se, counts=counts)


def monte_carlo_value(env, policy, episodes: int, seed, max_steps: int = 100_000) -> MonteCarloEstimate:
    """First-visit Monte-Carlo values of a tabular episodic environment.

    ``policy(state, rng)`` returns an action; the environment's active task is
    left unchanged.
    """
    rng = np.random.default_rng(seed)
    n = env.n_states
    sums, sq, counts = np.zeros(n), np.zeros(n), np.zeros(n, dtype=np.int64)
    g = env.discount
    for _ in range(episodes):
        s = env.reset(rng)
        states, rewards = [], []
        for _ in range(max_steps):
            a = policy(s, rng)
            r, s_next, terminal, truncated = env.step(a, rng)
            states.append(s)
            rewards.append(r)
            s = s_next
            if terminal or truncated:
                break
        ret = 0.0
        returns = np.empty(len(states))
        for t in range(len(states) - 1, -1, -1):
            ret = rewards[t] + g * ret
            returns[t] = ret
        seen = set()
        for t, st in enumerate(states):
            if st in seen:
                continue
            seen.add(st)
            sums[st] += returns[t]
            sq[st] += returns[t] ** 2
            counts[st] += 1
    return _summarize(sums, sq, counts)


def mrp_start_state_returns(mrp: MrpModel, start_state: int, episodes: int, rng: np.random.Generator,
                            max_steps: int = 10_000) -> np.ndarray:
    """Discounted returns of ``episodes`` independent walkers started at ``start_state``.

    Walkers stop at terminal states (or after ``max_steps``, which truncates the
    discounted tail at below ``gamma**max_steps``). Reward noise is Gaussian.
    """
    cum = np.cumsum(mrp.transition, axis=1)
    sd = np.sqrt(mrp.reward_variance)
    s = np.full(episodes, start_state, dtype=np.int64)
    ret = np.zeros(episodes)
    scale = np.ones(episodes)
    alive = ~mrp.terminal[s]
    for _ in range(max_steps):
        if not alive.any():
            break
        idx = np.flatnonzero(alive)
        cur = s[idx]
        r = mrp.reward[cur] + sd[cur] * rng.standard_normal(idx.size)
        ret[idx] += scale[idx] * r
        scale[idx] *= mrp.discount
        u = rng.random(idx.size) * cum[cur, -1]
        nxt = np.minimum((cum[cur] <= u[:, None]).sum(axis=1), mrp.n_states - 1)
        s[idx] = nxt
        alive[idx] = ~mrp.terminal[nxt]
    return ret


def mrp_monte_carlo(mrp: MrpModel, episodes_per_state: int, rng: np.random.Generator,
                    states=None) -> MonteCarloEstimate:
    """Per-state Monte-Carlo values by launching walkers from every listed state."""
    states = range(mrp.n_states) if states is None else states
    n = mrp.n_states
    sums, sq, counts = np.zeros(n), np.zeros(n), np.zeros(n, dtype=np.int64)
    for s in states:
        if mrp.terminal[s]:
            counts[s] = episodes_per_state
            continue
        ret = mrp_start_state_returns(mrp, s, episodes_per_state, rng)
        sums[s], sq[s], counts[s] = ret.sum(), (ret**2).sum(), ret.size
    return _summarize(sums, sq, counts)


def continuous_grid_returns(env, task, starts, episodes_per_start: int, rng: np.random.Generator,
                            max_steps: int = 10_000) -> MonteCarloEstimate:
    """Uniform-random-policy Monte-Carlo values of continuous-grid points, vectorized over walkers."""
    starts = np.asarray(starts, dtype=float)
    values, ses = np.empty(len(starts)), np.empty(len(starts))
    corners = np.array([env.corners[g] for g in ("TL", "TR", "BL", "BR")])
    goal_r = np.array([task.reward_for(g) for g in ("TL", "TR", "BL", "BR")])
    for j, start in enumerate(starts):
        pos = np.tile(start, (episodes_per_start, 1))
        ret = np.zeros(episodes_per_start)
        scale = np.ones(episodes_per_start)
        alive = np.ones(episodes_per_start, dtype=bool)
        for _ in range(max_steps):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            a = (rng.random(idx.size) * 4).astype(np.int64)
            nxt = pos[idx] + env.step_size * env.deltas[a]
            if env.noise:
                nxt += rng.uniform(-env.noise_half_width, env.noise_half_width, size=(idx.size, 2))
            nxt = np.clip(nxt, 0.0, 1.0)
            dist = np.abs(nxt[:, None, :] - corners[None]).sum(axis=2)
            hit = dist <= env.goal_radius
            done = hit.any(axis=1)
            r = np.where(done, goal_r[np.argmax(hit, axis=1)], 0.0)
            ret[idx] += scale[idx] * r
            scale[idx] *= env.discount
            pos[idx] = nxt
            alive[idx[done]] = False
        values[j] = ret.mean()
        ses[j] = ret.std(ddof=1) / np.sqrt(ret.size)
    return MonteCarloEstimate(values=values, stderr=ses, counts=np.full(len(starts), episodes_per_start))
