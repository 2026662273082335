import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptvalue.core_mdp import (
    MdpModel,
    MrpModel,
    bellman_apply,
    exact_value,
    modified_mrp,
    q_value_iteration,
    reduce_mdp,
    stationary_distribution,
    transient_fixed_point,
    transient_operator_apply,
)
from ptvalue.errors import ConvergenceError, ModelError


def swap_chain(gamma=0.5):
    return MrpModel(transition=[[0, 1], [1, 0]], reward=[1.0, 0.0], discount=gamma)


def random_mrp(rng, n, gamma=None):
    P = rng.random((n, n)) + 0.05
    P /= P.sum(axis=1, keepdims=True)
    gamma = rng.uniform(0.1, 0.99) if gamma is None else gamma
    return MrpModel(transition=P, reward=rng.normal(size=n), discount=gamma,
                    reward_variance=rng.random(n))


def random_mdp(rng, n, n_actions, terminal=False):
    P = rng.random((n, n_actions, n)) * (rng.random((n, n_actions, n)) < 0.7) + 1e-3
    term = np.zeros(n, dtype=bool)
    if terminal:
        term[-1] = True
        P[-1] = 0.0
        P[-1, :, -1] = 1.0
    P /= P.sum(axis=2, keepdims=True)
    R = rng.normal(size=(n, n_actions))
    if terminal:
        R[-1] = 0.0
    return MdpModel(transition=P, reward=R, discount=0.9, terminal=term)


def random_policy(rng, n, n_actions):
    pi = rng.random((n, n_actions)) + 0.1
    return pi / pi.sum(axis=1, keepdims=True)


class TestValidation:
    def test_rejects_non_stochastic_rows(self):
        with pytest.raises(ModelError):
            MrpModel(transition=[[0.5, 0.4], [0, 1]], reward=[0, 0], discount=0.9)

    def test_rejects_discount_at_one(self):
        with pytest.raises(ModelError):
            MrpModel(transition=[[1.0]], reward=[0], discount=1.0)

    def test_rejects_negative_variance(self):
        with pytest.raises(ModelError):
            MrpModel(transition=[[1.0]], reward=[0], discount=0.5, reward_variance=[-1])

    def test_rejects_bad_start(self):
        with pytest.raises(ModelError):
            MrpModel(transition=[[1.0]], reward=[0], discount=0.5, start_dist=[0.5])

    def test_arrays_are_read_only(self):
        m = swap_chain()
        with pytest.raises(ValueError):
            m.reward[0] = 3.0


class TestReduceMdp:
    def test_deterministic_policy_selects_slice(self):
        rng = np.random.default_rng(0)
        mdp = random_mdp(rng, 4, 3)
        pi = np.zeros((4, 3))
        pi[:, 0] = 1
        mrp = reduce_mdp(mdp, pi)
        np.testing.assert_allclose(mrp.transition, mdp.transition[:, 0, :])
        np.testing.assert_allclose(mrp.reward, mdp.reward[:, 0])

    def test_identical_actions_under_uniform(self):
        P = np.array([[[0.3, 0.7], [0.3, 0.7]], [[1.0, 0.0], [1.0, 0.0]]])
        mdp = MdpModel(transition=P, reward=[[1, 1], [2, 2]], discount=0.9)
        mrp = reduce_mdp(mdp, np.full((2, 2), 0.5))
        np.testing.assert_allclose(mrp.transition, P[:, 0, :])

    def test_hand_marginalization(self):
        P = np.array([[[0.2, 0.8], [1.0, 0.0]], [[0.5, 0.5], [0.0, 1.0]]])
        R = np.array([[1.0, 3.0], [-2.0, 0.0]])
        pi = np.array([[0.25, 0.75], [0.6, 0.4]])
        mrp = reduce_mdp(MdpModel(transition=P, reward=R, discount=0.9), pi)
        expected_P = np.zeros((2, 2))
        expected_r = np.zeros(2)
        for s in range(2):
            for a in range(2):
                expected_r[s] += pi[s, a] * R[s, a]
                for t in range(2):
                    expected_P[s, t] += pi[s, a] * P[s, a, t]
        np.testing.assert_allclose(mrp.transition, expected_P, atol=1e-15)
        np.testing.assert_allclose(mrp.reward, expected_r, atol=1e-15)
        # the one-step reward is 1 w.p. .25, 3 w.p. .75 in state 0
        assert mrp.reward_variance[0] == pytest.approx(0.25 * 1 + 0.75 * 9 - 2.5**2)
        assert mrp.reward_variance[1] == pytest.approx(0.6 * 4 - 1.2**2)

    def test_transition_conditional_rewards_give_spread(self):
        P = np.array([[[0.5, 0.5]], [[0.0, 1.0]]])
        R = np.zeros((2, 1, 2))
        R[0, 0] = [0.0, 2.0]
        mrp = reduce_mdp(MdpModel(transition=P, reward=R, discount=0.9), np.ones((2, 1)))
        assert mrp.reward[0] == pytest.approx(1.0)
        assert mrp.reward_variance[0] == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        mdp = random_mdp(np.random.default_rng(1), 3, 2)
        with pytest.raises(ModelError):
            reduce_mdp(mdp, np.full((3, 3), 1 / 3))


class TestOperators:
    def test_bellman_fixed_point_and_zero(self):
        m = random_mrp(np.random.default_rng(2), 5)
        v = exact_value(m)
        np.testing.assert_allclose(bellman_apply(m, v), v, atol=1e-12)
        np.testing.assert_allclose(bellman_apply(m, np.zeros(5)), m.reward)

    def test_two_bellman_applications(self):
        m = swap_chain()
        v = bellman_apply(m, bellman_apply(m, [0.0, 0.0]))
        np.testing.assert_allclose(v, [1.0, 0.5])

    def test_exact_values(self):
        np.testing.assert_allclose(exact_value(swap_chain()), [4 / 3, 2 / 3])
        loop = MrpModel(transition=[[1.0]], reward=[1.0], discount=0.9)
        assert exact_value(loop)[0] == pytest.approx(10.0)
        zero = swap_chain().with_reward([0.0, 0.0])
        np.testing.assert_array_equal(exact_value(zero), 0.0)

    def test_transient_operator_reduces_to_bellman(self):
        m = random_mrp(np.random.default_rng(3), 4)
        vt = np.arange(4.0)
        np.testing.assert_allclose(transient_operator_apply(m, np.zeros(4), vt), bellman_apply(m, vt))

    def test_transient_operator_scalar_loop(self):
        rng = np.random.default_rng(4)
        m = random_mrp(rng, 3)
        vp, vt = rng.normal(size=3), rng.normal(size=3)
        out = transient_operator_apply(m, vp, vt)
        for s in range(3):
            acc = m.reward[s] - vp[s]
            for x in range(3):
                acc += m.discount * m.transition[s, x] * (vp[x] + vt[x])
            assert out[s] == pytest.approx(acc, abs=1e-13)

    def test_transient_fixed_point_examples(self):
        m = swap_chain()
        np.testing.assert_allclose(transient_fixed_point(m, [1.0, 1.0]), [1 / 3, -1 / 3])
        np.testing.assert_allclose(transient_fixed_point(m, [0.0, 0.0]), exact_value(m))
        np.testing.assert_allclose(transient_fixed_point(m, exact_value(m)), 0.0, atol=1e-15)
        vt = transient_fixed_point(m, [1.0, 1.0])
        np.testing.assert_allclose(transient_operator_apply(m, [1.0, 1.0], vt), vt, atol=1e-12)

    def test_dimension_checks(self):
        with pytest.raises(ModelError):
            bellman_apply(swap_chain(), [0.0, 0.0, 0.0])


class TestStationary:
    def test_doubly_stochastic_is_uniform(self):
        P = np.array([[0.2, 0.3, 0.5], [0.5, 0.2, 0.3], [0.3, 0.5, 0.2]])
        m = MrpModel(transition=P, reward=np.zeros(3), discount=0.9)
        np.testing.assert_allclose(stationary_distribution(m), 1 / 3, atol=1e-12)

    def test_periodic_swap_starts_at_fixed_point(self):
        np.testing.assert_allclose(stationary_distribution(swap_chain()), [0.5, 0.5])

    def test_matches_matrix_power(self):
        from ptvalue.environments.families import BASE_TRANSITION, normalized_base_transition

        P = normalized_base_transition()
        assert P.shape == BASE_TRANSITION.shape
        m = MrpModel(transition=P, reward=np.zeros(7), discount=0.9)
        d = stationary_distribution(m)
        Q = P.copy()
        for _ in range(6):
            Q = Q @ Q  # P^64
        np.testing.assert_allclose(d, Q[0], atol=1e-10)
        np.testing.assert_allclose(d @ P, d, atol=1e-12)

    def test_cap_raises_with_name(self):
        # asymmetric so the uniform start is not already stationary
        P = np.array([[0.9999, 0.0001], [0.0002, 0.9998]])
        m = MrpModel(transition=P, reward=np.zeros(2), discount=0.9, name="sticky")
        with pytest.raises(ConvergenceError, match="sticky"):
            stationary_distribution(m, max_iter=10)


class TestModifiedMrp:
    def test_triples_sorted_and_stochastic(self):
        mdp = random_mdp(np.random.default_rng(5), 2, 2)
        tm = modified_mrp(mdp, random_policy(np.random.default_rng(6), 2, 2), np.zeros(2))
        assert tm.triples == sorted(tm.triples)
        np.testing.assert_allclose(tm.mrp.transition.sum(axis=1), 1.0, atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("vp_kind", ["zero", "truth", "random"])
    def test_triple_values_average_to_transient_fixed_point(self, seed, vp_kind):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 6))
        mdp = random_mdp(rng, n, 2, terminal=True)
        pi = random_policy(rng, n, 2)
        mrp = reduce_mdp(mdp, pi)
        v = exact_value(mrp)
        vp = {"zero": np.zeros(n), "truth": v, "random": rng.normal(size=n)}[vp_kind]
        tm = modified_mrp(mdp, pi, vp)
        values = exact_value(tm.mrp)
        target = transient_fixed_point(mrp, vp)
        R = mdp.expected_reward()
        avg = np.zeros(n)
        for i, (s, a, t) in enumerate(tm.triples):
            # exact per-triple value, then its policy/transition average per first state
            assert values[i] == pytest.approx(R[s, a] + mdp.discount * v[t] - vp[s], abs=1e-8)
            avg[s] += pi[s, a] * mdp.transition[s, a, t] * values[i]
        np.testing.assert_allclose(avg, target, atol=1e-8)


class TestQIteration:
    def test_single_state(self):
        mdp = MdpModel(transition=np.ones((1, 1, 1)), reward=[[1.0]], discount=0.5)
        assert q_value_iteration(mdp)[0, 0] == pytest.approx(2.0, abs=1e-10)


mrp_sizes = st.integers(min_value=1, max_value=6)


@settings(max_examples=1000, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=mrp_sizes)
def test_transient_operator_contracts(seed, n):
    rng = np.random.default_rng(seed)
    m = random_mrp(rng, n)
    vp = rng.normal(size=n)
    u, v = rng.normal(size=n) * 10, rng.normal(size=n) * 10
    lhs = np.abs(transient_operator_apply(m, vp, u) - transient_operator_apply(m, vp, v)).max()
    assert lhs <= m.discount * np.abs(u - v).max() + 1e-12


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=mrp_sizes)
def test_decomposition_identity(seed, n):
    rng = np.random.default_rng(seed)
    m = random_mrp(rng, n)
    vp = rng.normal(size=n) * 5
    vt = transient_fixed_point(m, vp)
    np.testing.assert_allclose(vp + vt, exact_value(m), atol=1e-10)
    np.testing.assert_allclose(transient_operator_apply(m, vp, vt), vt, atol=1e-10)
    v = exact_value(m)
    A = np.eye(n) - m.discount * m.transition
    assert np.abs(A @ v - m.reward).max() <= 1e-10
