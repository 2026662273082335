import itertools
import pickle

import numpy as np
import pytest
from scipy import stats

from ptvalue.core_mdp import exact_value, q_value_iteration
from ptvalue.environments import (
    ContinuousGrid,
    ControlGrid,
    DiscreteGrid,
    GridTask,
    ScheduleClock,
    TaskSchedule,
    control_tasks,
    default_prediction_schedule,
    epsilon_task_family,
    prediction_tasks,
    schedule_step,
)
from ptvalue.environments.control import parse_layout
from ptvalue.environments.families import simplex_points
from ptvalue.environments.grids import DOWN, LEFT, RIGHT, UP
from ptvalue.errors import ConfigError, UsageError


class TestDiscreteGrid:
    def test_interior_move(self):
        env = DiscreteGrid()
        env.reset()
        reward, nxt, terminal, _ = env.step(UP)
        assert env.rowcol(nxt) == (1, 2) and reward == 0.0 and not terminal

    def test_walls_clamp(self):
        env = DiscreteGrid()
        env.reset()
        env.state = 2  # (0, 2)
        _, nxt, _, _ = env.step(UP)
        assert nxt == 2

    def test_entering_goal_under_task_two(self):
        env = DiscreteGrid()
        env.set_task(prediction_tasks()[1])
        env.reset()
        env.state = 1  # right of TL
        reward, nxt, terminal, _ = env.step(LEFT)
        assert (reward, nxt, terminal) == (1.0, 0, True)
        with pytest.raises(UsageError):
            env.step(LEFT)

    def test_task_table(self):
        tasks = prediction_tasks()
        table = [tuple(t.goal_rewards[g] for g in ("TL", "TR", "BL", "BR")) for t in tasks]
        assert table == [(0, 1, 0, 1), (1, 0, 1, 0), (0, 0, 1, 1), (1, 1, 0, 0)]
        assert DiscreteGrid.discount == 0.9

    def test_malformed_schedule(self):
        bad = TaskSchedule(tasks=[GridTask({"TL": 1.0})], switch_every=5)
        with pytest.raises(ConfigError):
            DiscreteGrid(bad)

    def test_sampling_matches_induced_mrp(self):
        env = DiscreteGrid()
        task = prediction_tasks()[0]
        mrp = env.induced_mrp(task)
        rng = np.random.default_rng(0)
        s0 = 7
        counts = np.zeros(env.n_states)
        for _ in range(100_000):
            env.reset()
            env.state = s0
            _, nxt, _, _ = env.step(int(rng.random() * 4))
            counts[nxt] += 1
        p = mrp.transition[s0]
        support = p > 0
        chi2 = stats.chisquare(counts[support], 100_000 * p[support])
        assert chi2.pvalue > 1e-3
        assert counts[~support].sum() == 0

    def test_induced_mrp_goals_absorbing(self):
        env = DiscreteGrid()
        mrp = env.induced_mrp(prediction_tasks()[0])
        v = exact_value(mrp)
        for s in env.goal_states.values():
            assert abs(v[s]) < 1e-12 and mrp.transition[s, s] == 1.0
        # task 1 pays on the right-hand side, so values increase to the right
        assert v[14] > v[12] > v[10]


class TestContinuousGrid:
    def test_noiseless_step(self):
        env = ContinuousGrid(rng_seed=0, noise=False)
        env.reset()
        env.state = np.array([0.5, 0.5])
        _, nxt, _, _ = env.step(RIGHT)
        np.testing.assert_allclose(nxt, [0.6, 0.5])

    def test_goal_regions_use_one_norm(self):
        env = ContinuousGrid(rng_seed=0)
        assert env.goal_at((0.05, 0.05)) == "TL"
        assert env.goal_at((0.05, 0.06)) is None  # 1-norm 0.11
        assert env.goal_at((0.97, 0.98)) == "BR"
        assert env.goal_at((0.5, 0.5)) is None

    def test_start_box_and_clipping(self):
        env = ContinuousGrid(rng_seed=1, noise=False)
        for _ in range(100):
            s = env.reset()
            assert np.all((s >= 0.45) & (s <= 0.55))
        env.state = np.array([0.5, 0.02])
        _, nxt, _, _ = env.step(UP)
        assert nxt[1] == 0.0

    def test_noise_is_uniform_in_box(self):
        env = ContinuousGrid(rng_seed=2)
        n = 100_000
        offsets = np.empty((n, 2))
        for i in range(n):
            env.reset()
            env.state = np.array([0.5, 0.5])
            _, nxt, _, _ = env.step(DOWN)
            offsets[i] = nxt - [0.5, 0.6]
        assert np.abs(offsets).max() <= 0.01 + 1e-12
        bins = np.linspace(-0.01, 0.01, 11)
        hist, _, _ = np.histogram2d(offsets[:, 0], offsets[:, 1], bins=[bins, bins])
        assert stats.chisquare(hist.ravel()).pvalue > 1e-3

    def test_reward_on_goal_entry(self):
        env = ContinuousGrid(rng_seed=0, noise=False)
        env.reset()
        env.state = np.array([0.95, 0.1])
        reward, _, terminal, _ = env.step(UP)
        assert terminal and reward == 1.0  # task 1 pays at TR


class TestControlGrid:
    def test_layout_fixture(self):
        env = ControlGrid(rng_seed=0)
        assert (env.n_rows, env.n_cols) == (6, 6)
        assert env.start_state == 30  # bottom-left
        g1, g2 = env.goal_states["G1"], env.goal_states["G2"]
        assert g1 == 5 and g2 == 4  # adjacent, top-right
        assert ControlGrid.discount == 0.95

    def test_layout_validation(self):
        with pytest.raises(ConfigError):
            parse_layout(". . G1\nS . .")
        with pytest.raises(ConfigError):
            parse_layout(". x G1 G2\nS . . .")

    def test_blocked_move(self):
        env = ControlGrid(rng_seed=0)
        env.reset()
        env.state = 30
        assert env.next_table[30, LEFT] == 30
        wall_neighbour = 6  # (1, 0) has a wall at (1, 1)
        assert env.walls[7]
        assert env.next_table[wall_neighbour, RIGHT] == wall_neighbour

    def test_success_frequency(self):
        env = ControlGrid(rng_seed=3)
        n = 100_000
        hits = 0
        for _ in range(n):
            env.reset()
            env.state = 24  # (4, 0): up is free, left/right lead to wall and border
            _, nxt, _, _ = env.step(UP)
            hits += nxt == 18
        sigma = np.sqrt(0.9 * 0.1 / n)
        assert abs(hits / n - 0.9) < 3 * sigma

    def test_slip_mapping(self):
        env = ControlGrid(rng_seed=0)
        assert env.effective_action(UP, 0.5) == UP
        assert env.effective_action(UP, 0.92) == LEFT
        assert env.effective_action(UP, 0.97) == RIGHT
        assert env.effective_action(LEFT, 0.97) == DOWN

    @pytest.mark.parametrize("task_index, goal", [(0, "G1"), (1, "G2")])
    def test_greedy_optimal_policy_reaches_positive_goal(self, task_index, goal):
        env = ControlGrid(rng_seed=0)
        task = control_tasks()[task_index]
        q = q_value_iteration(env.mdp(task))
        s = env.start_state
        for _ in range(50):
            s = int(env.next_table[s, int(np.argmax(q[s]))])
            if env.terminal_mask[s]:
                break
        assert s == env.goal_states[goal]

    def test_truncation(self):
        env = ControlGrid(rng_seed=0, max_steps=3)
        env.reset()
        flags = [env.step(LEFT)[3] for _ in range(3)]
        assert flags == [False, False, True]
        assert env.needs_reset


class TestSchedule:
    def test_boundary_at_episode_fifty(self):
        env = DiscreteGrid()
        clock = ScheduleClock(default_prediction_schedule())
        rng = np.random.default_rng(0)
        boundaries = []
        for episode in range(51):
            env.reset()
            first = True
            while True:
                tr = schedule_step(env, clock, int(rng.random() * 4))
                if first:
                    boundaries.append(tr.boundary)
                else:
                    assert not tr.boundary
                first = False
                if tr.terminal:
                    break
        assert boundaries[49] is False and boundaries[50] is True
        assert sum(boundaries) == 1

    def test_hidden_boundaries(self):
        sched = default_prediction_schedule(switch_every=2, boundary_visible=False)
        env = DiscreteGrid(sched)
        clock = ScheduleClock(sched)
        rng = np.random.default_rng(1)
        seen = set()
        for _ in range(10):
            env.reset()
            while not env.needs_reset:
                tr = schedule_step(env, clock, int(rng.random() * 4))
                assert not tr.boundary
                seen.add(tr.task_id)
        assert seen == {0, 1, 2, 3}

    def test_cycle_order(self):
        sched = default_prediction_schedule()
        seq = [sched.task_index_at(e) for e in range(0, 500, 50)]
        assert seq == [0, 1, 2, 3, 0, 1, 2, 3, 0, 1]
        assert sched.n_boundaries(500) == 9

    def test_iid_order_is_seeded_and_prefix_stable(self):
        a = default_prediction_schedule(order="iid", seed=5)
        b = default_prediction_schedule(order="iid", seed=5)
        first = [a.block_task(i) for i in range(10)]
        assert [b.block_task(i) for i in range(500)][:10] == first
        assert [a.block_task(i) for i in range(10)] == first

    def test_validation(self):
        with pytest.raises(ConfigError):
            TaskSchedule(tasks=[], switch_every=1)
        with pytest.raises(ConfigError):
            TaskSchedule(tasks=prediction_tasks(), switch_every=0)
        with pytest.raises(ConfigError):
            TaskSchedule(tasks=prediction_tasks(), switch_every=3, unit="minute")

    def test_step_requires_reset(self):
        env = DiscreteGrid()
        clock = ScheduleClock(default_prediction_schedule())
        with pytest.raises(UsageError):
            schedule_step(env, clock, 0)

    def test_determinism(self):
        def stream(seed):
            env = ControlGrid(rng_seed=seed)
            clock = ScheduleClock(env.schedule)
            rng = np.random.default_rng(seed + 100)
            out = []
            for _ in range(5):
                env.reset()
                while not env.needs_reset:
                    tr = schedule_step(env, clock, int(rng.random() * 4))
                    out.append((tr.state, tr.action, tr.reward, tr.next_state, tr.terminal))
            return pickle.dumps(out)

        assert stream(4) == stream(4)
        assert stream(4) != stream(5)


class TestEpsilonFamily:
    @pytest.mark.parametrize("eps", [0.5, 1.0, 2.0])
    def test_pairwise_distances(self, eps):
        family = epsilon_task_family(eps, rng_seed=3)
        values = [exact_value(m) for m in family]
        for i, j in itertools.combinations(range(7), 2):
            assert np.linalg.norm(values[i] - values[j]) == pytest.approx(eps, abs=1e-9)

    def test_zero_diameter(self):
        family = epsilon_task_family(0.0, rng_seed=1)
        values = np.array([exact_value(m) for m in family])
        np.testing.assert_allclose(values, np.tile(values[0], (7, 1)), atol=1e-12)

    def test_rewards_reproduce_values(self):
        rng = np.random.default_rng(9)
        points = simplex_points(7, 7, 1.0, rng)
        family = epsilon_task_family(1.0, rng_seed=9)
        for v, m in zip(points, family):
            np.testing.assert_allclose(exact_value(m), v, atol=1e-9)
            np.testing.assert_allclose(m.reward_variance, 0.01)

    def test_infeasible_geometry(self):
        with pytest.raises(ConfigError):
            simplex_points(9, 7, 1.0, np.random.default_rng(0))
