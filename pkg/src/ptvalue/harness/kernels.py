"""Compiled tabular experiment kernels.

They follow the reference loops in :mod:`ptvalue.learners.loops` operation for
operation (same RNG draws in the same order, same floating-point expressions),
so their output is bitwise identical to the Python learners. Tests pin that.
"""
from __future__ import annotations

import numpy as np
from numba import njit

TD, TD_RESET, PT = 0, 1, 2
Q, Q_RESET, PT_Q, PT_Q_CRL = 0, 1, 2, 3


@njit(cache=True)
def _grow(buf, n):
    if n < buf.shape[0]:
        return buf
    out = np.empty(buf.shape[0] * 2, dtype=buf.dtype)
    out[: buf.shape[0]] = buf
    return out


@njit(cache=True)
def _consolidate_v(theta, w, buf, n, alpha_bar):
    targets = np.empty(n)
    for i in range(n):
        s = buf[i]
        targets[i] = theta[s] + w[s]
    for i in range(n):
        s = buf[i]
        theta[s] = theta[s] + alpha_bar * (targets[i] - theta[s])


@njit(cache=True)
def prediction_kernel(next_table, terminal, goal_rewards, start_state, episode_task, boundary_before,
                      algo, alpha, alpha_bar, discount, eval_states, rng):
    """Uniform-random-policy prediction on a deterministic tabular grid.

    Returns the working estimate and the retained estimate on ``eval_states``
    after every episode.
    """
    n_states, n_actions = next_table.shape
    n_episodes = episode_task.shape[0]
    n_eval = eval_states.shape[0]
    w = np.zeros(n_states)
    theta = np.zeros(n_states)
    buf = np.empty(4096, dtype=np.int64)
    n_buf = 0
    online = np.empty((n_episodes, n_eval))
    retained = np.empty((n_episodes, n_eval))
    for ep in range(n_episodes):
        task = episode_task[ep]
        if boundary_before[ep]:
            if algo == TD_RESET:
                w[:] = 0.0
            elif algo == PT:
                if n_buf > 0:
                    _consolidate_v(theta, w, buf, n_buf, alpha_bar)
                n_buf = 0
                w[:] = 0.0
        s = start_state
        while True:
            a = int(rng.random() * n_actions)
            nxt = next_table[s, a]
            term = terminal[nxt]
            r = goal_rewards[task, nxt] if term else 0.0
            if algo == PT:
                buf = _grow(buf, n_buf)
                buf[n_buf] = s
                n_buf += 1
                v_next = 0.0 if term else theta[nxt] + w[nxt]
                delta = r + discount * v_next - (theta[s] + w[s])
            else:
                v_next = 0.0 if term else w[nxt]
                delta = r + discount * v_next - w[s]
            w[s] = w[s] + alpha * delta
            if not np.isfinite(w[s]):
                raise FloatingPointError("non-finite weight in prediction kernel")
            s = nxt
            if term:
                break
        for j in range(n_eval):
            e = eval_states[j]
            if algo == PT:
                online[ep, j] = theta[e] + w[e]
                retained[ep, j] = theta[e]
            else:
                online[ep, j] = w[e]
                retained[ep, j] = w[e]
    return online, retained


@njit(cache=True)
def _consolidate_q(theta, w, buf_s, buf_a, n, alpha_bar):
    targets = np.empty(n)
    for i in range(n):
        targets[i] = theta[buf_a[i], buf_s[i]] + w[buf_a[i], buf_s[i]]
    for i in range(n):
        a, s = buf_a[i], buf_s[i]
        theta[a, s] = theta[a, s] + alpha_bar * (targets[i] - theta[a, s])


@njit(cache=True)
def _continual_consolidate(theta, w, buf_s, buf_a, n_buf, alpha_bar, decay):
    if n_buf > 0:
        _consolidate_q(theta, w, buf_s, buf_a, n_buf, alpha_bar)
    for b in range(w.shape[0]):
        for x in range(w.shape[1]):
            w[b, x] = decay * w[b, x]
    return 0


@njit(cache=True)
def _slip(action, u):
    if u < 0.9:
        return action
    # perpendicular pairs: up/down -> (left, right); left/right -> (up, down)
    if action <= 1:
        return 2 if u < 0.95 else 3
    return 0 if u < 0.95 else 1


@njit(cache=True)
def control_kernel(next_table, terminal, goal_rewards, start_state, episode_task, boundary_before,
                   algo, alpha, alpha_bar, discount, epsilon, k, decay, max_steps, rng, k_in_steps=False):
    """Epsilon-greedy control on a slippery tabular grid; returns per-episode discounted returns.

    ``k`` counts episodes between consolidations for the continual variant, or
    environment steps when ``k_in_steps`` is set.
    """
    n_states, n_actions = next_table.shape
    n_episodes = episode_task.shape[0]
    w = np.zeros((n_actions, n_states))
    theta = np.zeros((n_actions, n_states))
    buf_s = np.empty(4096, dtype=np.int64)
    buf_a = np.empty(4096, dtype=np.int64)
    n_buf = 0
    ties = np.empty(n_actions, dtype=np.int64)
    q = np.empty(n_actions)
    returns = np.empty(n_episodes)
    pt = algo == PT_Q or algo == PT_Q_CRL
    ticks = 0
    for ep in range(n_episodes):
        task = episode_task[ep]
        if boundary_before[ep] and algo != PT_Q_CRL:
            if algo == Q_RESET:
                w[:, :] = 0.0
            elif algo == PT_Q:
                if n_buf > 0:
                    _consolidate_q(theta, w, buf_s, buf_a, n_buf, alpha_bar)
                n_buf = 0
                w[:, :] = 0.0
        s = start_state
        ret = 0.0
        scale = 1.0
        steps = 0
        while True:
            # action selection
            if rng.random() < epsilon:
                a = int(rng.random() * n_actions)
            else:
                for b in range(n_actions):
                    q[b] = theta[b, s] + w[b, s] if pt else w[b, s]
                best = q.max()
                n_ties = 0
                for b in range(n_actions):
                    if q[b] == best:
                        ties[n_ties] = b
                        n_ties += 1
                a = ties[0] if n_ties == 1 else ties[int(rng.random() * n_ties)]
            moved = _slip(a, rng.random())
            nxt = next_table[s, moved]
            term = terminal[nxt]
            r = goal_rewards[task, nxt] if term else 0.0
            steps += 1
            truncated = (not term) and steps >= max_steps
            if pt:
                buf_s = _grow(buf_s, n_buf)
                buf_a = _grow(buf_a, n_buf)
                buf_s[n_buf] = s
                buf_a[n_buf] = a
                n_buf += 1
            q_next = 0.0
            if not term:
                for b in range(n_actions):
                    q[b] = theta[b, nxt] + w[b, nxt] if pt else w[b, nxt]
                q_next = q.max()
            current = theta[a, s] + w[a, s] if pt else w[a, s]
            delta = r + discount * q_next - current
            w[a, s] = w[a, s] + alpha * delta
            if not np.isfinite(w[a, s]):
                raise FloatingPointError("non-finite weight in control kernel")
            ret += scale * r
            scale *= discount
            s = nxt
            if algo == PT_Q_CRL and k > 0 and k_in_steps:
                ticks += 1
                if ticks % k == 0:
                    n_buf = _continual_consolidate(theta, w, buf_s, buf_a, n_buf, alpha_bar, decay)
            if term or truncated:
                break
        returns[ep] = ret
        if algo == PT_Q_CRL and k > 0 and not k_in_steps:
            ticks += 1
            if ticks % k == 0:
                n_buf = _continual_consolidate(theta, w, buf_s, buf_a, n_buf, alpha_bar, decay)
    return returns, theta, w
