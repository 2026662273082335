import warnings

import numpy as np
import pytest

from ptvalue.core_mdp import MdpModel, MrpModel, exact_value, q_value_iteration, sample_next, transient_fixed_point
from ptvalue.environments import ControlGrid, DiscreteGrid, TaskSchedule, default_control_schedule, default_prediction_schedule
from ptvalue.environments.schedule import Transition
from ptvalue.errors import ConfigError, NumericalError
from ptvalue.features import rowcol_features, tabular_features
from ptvalue.learners import (
    PTLearner,
    PTQLearner,
    QLearner,
    TDLearner,
    act_epsilon_greedy,
    control_episode_loop,
    prediction_episode_loop,
    td_update,
)
from ptvalue.learners.pt import continual_pt_q_step


def swap_chain():
    return MrpModel(transition=[[0, 1], [1, 0]], reward=[1.0, 0.0], discount=0.5)


def random_mrp(rng, n):
    P = rng.random((n, n)) + 0.05
    P /= P.sum(axis=1, keepdims=True)
    return MrpModel(transition=P, reward=rng.normal(size=n), discount=rng.uniform(0.5, 0.95),
                    reward_variance=rng.random(n) * 0.5)


def grid_eval():
    env = DiscreteGrid()
    states = [s for s in range(env.n_states) if not env.terminal_mask[s]]
    values = [exact_value(env.induced_mrp(t))[states] for t in env.schedule.tasks]
    return states, values


class TestTD:
    def test_zero_step_size(self):
        f = tabular_features(3)
        w = np.array([1.0, 2.0, 3.0])
        out = td_update(w, Transition(0, 0, 5.0, 1, False), 0.0, f, 0.9)
        np.testing.assert_array_equal(out, w)

    def test_zero_bootstrap(self):
        f = tabular_features(3)
        out = td_update(np.zeros(3), Transition(1, 0, 1.0, 2, False), 0.25, f, 0.9)
        np.testing.assert_array_equal(out, [0.0, 0.25, 0.0])

    def test_terminal_contributes_nothing(self):
        f = tabular_features(2)
        out = td_update(np.array([0.0, 100.0]), Transition(0, 0, 1.0, 1, True), 1.0, f, 0.9)
        assert out[0] == 1.0

    def test_sweeps_converge(self):
        m = swap_chain()
        f = tabular_features(2)
        w = np.zeros(2)
        for _ in range(2000):
            for s in (0, 1):
                w = td_update(w, Transition(s, 0, m.reward[s], 1 - s, False), 0.5, f, m.discount)
        np.testing.assert_allclose(w, exact_value(m), atol=1e-6)

    def test_nan_guard(self):
        f = tabular_features(2)
        with pytest.raises(NumericalError):
            td_update(np.zeros(2), Transition(0, 0, 1e308, 1, False), 1e10, f, 0.9)

    def test_reset_on_boundary(self):
        learner = TDLearner(tabular_features(2), 0.1, 0.9, reset_on_boundary=True)
        learner.w[:] = 3.0
        learner.task_boundary()
        np.testing.assert_array_equal(learner.w, 0.0)


class TestTransientUpdate:
    def test_zero_mean_at_fixed_point(self):
        rng = np.random.default_rng(0)
        m = random_mrp(rng, 4)
        f = tabular_features(4)
        learner = PTLearner(f, alpha=1.0, alpha_bar=0.1, discount=m.discount)
        learner.theta = exact_value(m)
        n = 100_000
        incs = np.empty(n)
        s = 0
        for i in range(n):
            r, nxt = sample_next(m, s, rng)
            before = learner.w[s]
            learner.update(Transition(s, 0, r, nxt, False))
            incs[i] = learner.w[s] - before
            learner.w[:] = 0.0
            s = int(rng.integers(4))
        assert abs(incs.mean()) < 3 * incs.std() / np.sqrt(n)

    def test_zero_permanent_matches_td(self):
        f = rowcol_features()
        pt = PTLearner(f, alpha=0.3, alpha_bar=0.1, discount=0.9)
        w = np.zeros(10)
        rng = np.random.default_rng(1)
        for _ in range(200):
            tr = Transition(int(rng.integers(25)), 0, float(rng.normal()), int(rng.integers(25)), bool(rng.random() < 0.1))
            pt.update(tr)
            w = td_update(w, tr, 0.3, f, 0.9)
        np.testing.assert_allclose(pt.w, w, atol=1e-12)
        np.testing.assert_array_equal(pt.theta, 0.0)

    def test_frozen_permanent_converges_to_fixed_point(self):
        m = swap_chain()
        pt = PTLearner(tabular_features(2), alpha=0.5, alpha_bar=0.1, discount=m.discount)
        pt.theta = np.array([1.0, 1.0])
        for _ in range(2000):
            for s in (0, 1):
                pt.update(Transition(s, 0, m.reward[s], 1 - s, False))
        np.testing.assert_allclose(pt.w, transient_fixed_point(m, [1.0, 1.0]), atol=1e-6)
        np.testing.assert_allclose(pt.w, [1 / 3, -1 / 3], atol=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_equivalence_with_td(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 11))
        m = random_mrp(rng, n)
        f = tabular_features(n)
        vp = rng.normal(size=n) * 3
        pt = PTLearner(f, alpha=0.1, alpha_bar=0.1, discount=m.discount)
        pt.theta = vp.copy()
        td = TDLearner(f, alpha=0.1, discount=m.discount, init=vp)
        s = 0
        worst = 0.0
        for _ in range(2000):
            r, nxt = sample_next(m, s, rng)
            tr = Transition(s, 0, r, nxt, False)
            pt.update(tr)
            td.update(tr)
            worst = max(worst, np.abs(pt.theta + pt.w - td.w).max())
            s = nxt
        assert worst <= 1e-12


class TestConsolidation:
    def test_zero_transient_leaves_theta(self):
        pt = PTLearner(tabular_features(3), alpha=0.1, alpha_bar=0.3, discount=0.9)
        pt.theta = np.array([1.0, -2.0, 0.5])
        pt.buffer = [0, 1, 1, 2]
        pt.consolidate()
        np.testing.assert_array_equal(pt.theta, [1.0, -2.0, 0.5])
        assert pt.buffer == []

    @pytest.mark.parametrize("n", [1, 3, 10])
    def test_repeated_record_recurrence(self, n):
        a = 0.05
        pt = PTLearner(tabular_features(2), alpha=0.1, alpha_bar=a, discount=0.9)
        pt.theta = np.array([0.4, 0.0])
        pt.w = np.array([1.5, 7.0])
        target = 0.4 + 1.5
        pt.buffer = [0] * n
        pt.consolidate()
        expected = 0.4 + (1 - (1 - a) ** n) * (target - 0.4)
        assert pt.theta[0] == pytest.approx(expected, abs=1e-14)
        assert pt.theta[1] == 0.0

    def test_live_targets_move_by_transient(self):
        a = 0.1
        pt = PTLearner(tabular_features(1), alpha=0.1, alpha_bar=a, discount=0.9, target_mode="live")
        pt.w = np.array([2.0])
        pt.buffer = [0, 0, 0]
        pt.consolidate()
        assert pt.theta[0] == pytest.approx(3 * a * 2.0)

    def test_empty_buffer_warns(self):
        pt = PTLearner(tabular_features(2), alpha=0.1, alpha_bar=0.1, discount=0.9)
        with pytest.warns(RuntimeWarning):
            pt.consolidate()

    def test_boundary_resets_transient(self):
        pt = PTLearner(tabular_features(2), alpha=0.1, alpha_bar=0.5, discount=0.9)
        pt.update(Transition(0, 0, 1.0, 1, True))
        pt.task_boundary()
        np.testing.assert_array_equal(pt.w, 0.0)
        assert pt.theta[0] == pytest.approx(0.05)

    def test_q_mirror(self):
        a = 0.2
        pt = PTQLearner(tabular_features(2), 3, alpha=0.1, alpha_bar=a, discount=0.9)
        pt.w[2, 1] = 4.0
        pt.buffer = [(1, 2)] * 4
        pt.consolidate()
        assert pt.theta[2, 1] == pytest.approx((1 - (1 - a) ** 4) * 4.0)
        assert np.count_nonzero(pt.theta) == 1

    def test_config_validation(self):
        f = tabular_features(2)
        with pytest.raises(ConfigError):
            PTLearner(f, alpha=0.1, alpha_bar=0.1, discount=0.9, mode="continual", k=0)
        with pytest.raises(ConfigError):
            PTLearner(f, alpha=0.1, alpha_bar=0.1, discount=0.9, decay=1.5)
        with pytest.raises(ConfigError):
            PTLearner(f, alpha=0.1, alpha_bar=0.1, discount=0.9, mode="semi")


class TestPredictionLoop:
    def test_no_boundaries_frozen_zero_permanent_is_td(self):
        states, values = grid_eval()
        sched = default_prediction_schedule(switch_every=10_000)
        f = tabular_features(25)
        pt = PTLearner(f, alpha=0.1, alpha_bar=0.01, discount=0.9)
        td = TDLearner(f, alpha=0.1, discount=0.9)
        rows_pt = prediction_episode_loop(pt, DiscreteGrid(sched), 30, np.random.default_rng(3), states, values)
        rows_td = prediction_episode_loop(td, DiscreteGrid(sched), 30, np.random.default_rng(3), states, values)
        np.testing.assert_array_equal(pt.w, td.w)
        assert [r.online_metric for r in rows_pt] == [r.online_metric for r in rows_td]

    def test_row_and_boundary_counts(self):
        states, values = grid_eval()
        pt = PTLearner(tabular_features(25), alpha=0.1, alpha_bar=0.01, discount=0.9)
        calls = []
        original = pt.task_boundary
        pt.task_boundary = lambda: (calls.append(1), original())
        rows = prediction_episode_loop(pt, DiscreteGrid(), 500, np.random.default_rng(0), states, values)
        assert len(rows) == 500 and len(calls) == 9
        assert sum(r.boundary for r in rows) == 9
        assert [r.task_id for r in rows[::50]] == [0, 1, 2, 3, 0, 1, 2, 3, 0, 1]

    def test_semi_continual_needs_visible_boundaries(self):
        states, values = grid_eval()
        sched = default_prediction_schedule(boundary_visible=False)
        pt = PTLearner(tabular_features(25), alpha=0.1, alpha_bar=0.01, discount=0.9)
        with pytest.raises(ConfigError):
            prediction_episode_loop(pt, DiscreteGrid(sched), 1, np.random.default_rng(0), states, values)


class TestQ:
    def test_zero_permanent_matches_q_learning(self):
        f = tabular_features(4)
        pt = PTQLearner(f, 2, alpha=0.2, alpha_bar=0.1, discount=0.9)
        q = QLearner(f, 2, alpha=0.2, discount=0.9)
        rng = np.random.default_rng(0)
        for _ in range(300):
            tr = Transition(int(rng.integers(4)), int(rng.integers(2)), float(rng.normal()), int(rng.integers(4)), False)
            pt.update(tr)
            q.update(tr)
        np.testing.assert_array_equal(pt.w, q.w)

    def test_single_state_geometric_series(self):
        pt = PTQLearner(tabular_features(1), 1, alpha=0.5, alpha_bar=0.1, discount=0.5)
        for _ in range(200):
            pt.update(Transition(0, 0, 1.0, 0, False))
        assert pt.q_values(0)[0] == pytest.approx(2.0, abs=1e-6)

    def test_frozen_permanent_expected_sweeps_reach_optimal_q(self):
        env = ControlGrid(rng_seed=0)
        mdp = env.mdp(env.schedule.tasks[0])
        q_star = q_value_iteration(mdp)
        rng = np.random.default_rng(1)
        pt = PTQLearner(tabular_features(env.n_states), 4, alpha=1.0, alpha_bar=0.1, discount=mdp.discount)
        pt.theta = rng.normal(size=pt.theta.shape)
        R = mdp.expected_reward()
        open_states = [s for s in range(env.n_states) if not (env.walls[s] or env.terminal_mask[s])]
        for _ in range(600):
            qmax = np.array([pt.q_values(s).max() for s in range(env.n_states)])
            qmax[env.terminal_mask] = 0.0
            for s in open_states:
                for a in range(4):
                    target = R[s, a] + mdp.discount * mdp.transition[s, a] @ qmax
                    # terminal flag so the update bootstraps nothing beyond the expected target
                    pt.update(Transition(s, a, float(target), s, True))
        est = np.array([pt.q_values(s) for s in open_states])
        np.testing.assert_allclose(est, q_star[open_states], atol=1e-3)


class TestContinual:
    def test_never_consolidating_is_plain_q(self):
        f = tabular_features(4)
        pt = PTQLearner(f, 2, alpha=0.2, alpha_bar=0.1, discount=0.9, mode="continual", k=None, decay=1.0, unit="step")
        q = QLearner(f, 2, alpha=0.2, discount=0.9)
        rng = np.random.default_rng(4)
        for _ in range(300):
            tr = Transition(int(rng.integers(4)), int(rng.integers(2)), float(rng.normal()), int(rng.integers(4)), False)
            continual_pt_q_step(pt, tr)
            q.update(tr)
        np.testing.assert_array_equal(pt.w, q.w)
        np.testing.assert_array_equal(pt.theta, 0.0)

    @pytest.mark.parametrize("decay", [0.0, 0.25, 0.9])
    def test_decay_scales_norm(self, decay):
        pt = PTQLearner(tabular_features(3), 2, alpha=0.5, alpha_bar=0.1, discount=0.9, mode="continual", k=5,
                        decay=decay, unit="step")
        rng = np.random.default_rng(0)
        for i in range(5):
            tr = Transition(int(rng.integers(3)), int(rng.integers(2)), 1.0, int(rng.integers(3)), False)
            pt.update(tr)
            if i < 4:
                pt.clock_tick("step")
        before = np.linalg.norm(pt.w)
        pt.clock_tick("step")
        assert np.linalg.norm(pt.w) == pytest.approx(decay * before)
        assert pt.buffer == [] and pt.n_consolidations == 1

    def test_reduction_to_semi_continual(self):
        semi_sched = default_control_schedule()
        hidden = default_control_schedule(boundary_visible=False)
        f = tabular_features(36)
        semi = PTQLearner(f, 4, alpha=0.5, alpha_bar=0.05, discount=0.95)
        cont = PTQLearner(f, 4, alpha=0.5, alpha_bar=0.05, discount=0.95, mode="continual", k=50, decay=0.0)
        rows_a = control_episode_loop(semi, ControlGrid(semi_sched), 120, np.random.default_rng(7))
        rows_b = control_episode_loop(cont, ControlGrid(hidden), 120, np.random.default_rng(7))
        assert [(r.online_metric, r.task_id) for r in rows_a] == [(r.online_metric, r.task_id) for r in rows_b]
        np.testing.assert_array_equal(semi.theta, cont.theta)
        np.testing.assert_array_equal(semi.w, cont.w)

    def test_requires_continual_mode(self):
        pt = PTQLearner(tabular_features(2), 2, alpha=0.5, alpha_bar=0.1, discount=0.9)
        with pytest.raises(ConfigError):
            continual_pt_q_step(pt, Transition(0, 0, 0.0, 1, False))


class TestEpsilonGreedy:
    def test_uniform_at_one(self):
        rng = np.random.default_rng(0)
        n = 100_000
        counts = np.bincount([act_epsilon_greedy(np.array([0.0, 5.0, 1.0, 2.0]), 1.0, rng) for _ in range(n)], minlength=4)
        sigma = np.sqrt(0.25 * 0.75 / n)
        assert np.all(np.abs(counts / n - 0.25) < 3 * sigma)

    def test_greedy_unique(self):
        rng = np.random.default_rng(0)
        assert {act_epsilon_greedy(np.array([0.0, 5.0, 1.0]), 0.0, rng) for _ in range(100)} == {1}

    def test_two_way_tie(self):
        rng = np.random.default_rng(1)
        n = 100_000
        picks = np.array([act_epsilon_greedy(np.array([3.0, 0.0, 3.0]), 0.0, rng) for _ in range(n)])
        assert set(np.unique(picks)) == {0, 2}
        assert abs((picks == 0).mean() - 0.5) < 3 * np.sqrt(0.25 / n)
