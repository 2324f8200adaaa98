import itertools

import numpy as np
import pytest

from mdpagg.mdp import (
    INTERVENE,
    WAIT,
    ConvergenceError,
    MdpModel,
    check_stochastic,
    evaluate_policy,
    greedy_policy,
    q_value,
    q_values,
    solve_optimal,
)
from mdpagg.structure import is_threshold


def toy_model(alpha=0.5):
    """State 0 absorbs; waiting drifts down one state w.p. 1/2; intervening ends the chain."""
    wait = np.array([[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])
    stop = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    rewards = np.array([[0.0, 0.0], [1.0, 1.5], [1.0, 1.0]])
    return MdpModel(np.stack([wait, stop]), rewards, alpha)


def random_model(rng, n, n_actions=2, alpha=None):
    P = rng.random((n_actions, n, n)) ** 3
    P /= P.sum(axis=2, keepdims=True)
    R = rng.normal(size=(n, n_actions))
    return MdpModel(P, R, alpha if alpha is not None else rng.uniform(0.5, 0.99))


def brute_force(model):
    """Best policy by enumeration, each evaluated with an independent solve."""
    n = model.n_states
    best, best_v = None, None
    for combo in itertools.product(range(model.n_actions), repeat=n):
        pi = np.array(combo)
        P = model.transitions[pi, np.arange(n)]
        r = model.rewards[np.arange(n), pi]
        v = np.linalg.inv(np.eye(n) - model.alpha * P) @ r
        if best_v is None or v.sum() > best_v.sum():
            best, best_v = pi, v
    return best, best_v


class TestModel:
    def test_rejects_bad_rows(self):
        P = np.stack([np.eye(3), np.eye(3)])
        P[0, 1, 1] = 0.9
        with pytest.raises(ValueError, match="row 1"):
            MdpModel(P, np.zeros((3, 2)), 0.9)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError, match="rewards shape"):
            MdpModel(np.stack([np.eye(3)] * 2), np.zeros((3, 3)), 0.9)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 1.5])
    def test_rejects_alpha(self, alpha):
        with pytest.raises(ValueError, match="alpha"):
            MdpModel(np.stack([np.eye(2)] * 2), np.zeros((2, 2)), alpha)

    def test_arrays_are_read_only(self):
        model = toy_model()
        with pytest.raises(ValueError):
            model.rewards[1, 0] = 5.0

    def test_check_stochastic_tolerance(self):
        check_stochastic(np.array([[0.5, 0.5 + 5e-11]]).reshape(1, 2)[:, :].repeat(2, axis=0))
        with pytest.raises(ValueError):
            check_stochastic(np.array([[0.5, 0.5 + 1e-9], [0.5, 0.5]]))

    def test_policy_length_checked(self):
        with pytest.raises(ValueError, match="policy"):
            evaluate_policy(toy_model(), [0, 1])


class TestEvaluatePolicy:
    def test_single_self_loop_is_geometric_series(self):
        model = MdpModel(np.ones((1, 1, 1)), np.ones((1, 1)), 0.9975)
        assert evaluate_policy(model, [0])[0] == pytest.approx(400.0, rel=1e-12)

    def test_toy_chain_against_hand_solve(self):
        # v1 = 1 + 0.25 v1 ; v2 = 1 + 0.25 v1 + 0.25 v2
        v = evaluate_policy(toy_model(), [WAIT, WAIT, WAIT])
        np.testing.assert_allclose(v, [0.0, 4 / 3, 16 / 9], rtol=1e-14)

    def test_intervene_value_is_one_time_reward(self, model1):
        n = model1.n_states
        v = evaluate_policy(model1, np.full(n, INTERVENE))
        np.testing.assert_allclose(v[1:-1], model1.rewards[1:-1, INTERVENE], rtol=1e-13)

    def test_fixed_point(self, rng):
        for _ in range(20):
            model = random_model(rng, 6, n_actions=3)
            pi = rng.integers(0, 3, size=6)
            v = evaluate_policy(model, pi)
            P, r = model.policy_matrix(pi)
            assert np.abs(v - (r + model.alpha * P @ v)).max() < 1e-9


class TestQValue:
    def test_toy_hand_arithmetic(self):
        model = toy_model()
        v = np.array([0.0, 1.5, 11 / 6])
        # 1 + 0.5 * (0.5 * 1.5 + 0.5 * 11/6)
        assert q_value(model, v, 2, WAIT) == pytest.approx(11 / 6, rel=1e-14)
        assert q_value(model, v, 1, WAIT) == pytest.approx(1.375, rel=1e-14)
        assert q_value(model, v, 1, INTERVENE) == 1.5

    def test_intervene_equals_reward(self, model1, truth):
        for h in (1, 24, 50, 100):
            assert q_value(model1, truth.values, h, INTERVENE) == pytest.approx(
                model1.rewards[h, INTERVENE], abs=1e-12
            )

    def test_death_state_is_zero(self, model1, truth):
        assert q_value(model1, truth.values, 0, WAIT) == 0.0
        assert q_value(model1, truth.values, 0, INTERVENE) == 0.0

    def test_matrix_form_agrees(self, rng):
        model = random_model(rng, 5, n_actions=3)
        v = rng.normal(size=5)
        Q = q_values(model, v)
        for h in range(5):
            for a in range(3):
                assert Q[h, a] == pytest.approx(q_value(model, v, h, a), abs=1e-14)


class TestSolveOptimal:
    def test_toy_hand_solution(self):
        policy, v = solve_optimal(toy_model())
        np.testing.assert_array_equal(policy, [WAIT, INTERVENE, WAIT])
        np.testing.assert_allclose(v, [0.0, 1.5, 11 / 6], rtol=1e-14)

    def test_toy_matches_enumeration(self):
        model = toy_model()
        best, best_v = brute_force(model)
        policy, v = solve_optimal(model)
        np.testing.assert_allclose(v, best_v, atol=1e-12)

    def test_zero_rewards_tie_to_wait(self):
        P = np.stack([np.eye(4), np.roll(np.eye(4), 1, axis=1)])
        policy, v = solve_optimal(MdpModel(P, np.zeros((4, 2)), 0.9))
        np.testing.assert_array_equal(policy, 0)
        np.testing.assert_array_equal(v, 0.0)

    @pytest.mark.parametrize("method", ["policy-iteration", "value-iteration"])
    def test_bellman_optimality(self, rng, method):
        for _ in range(10):
            model = random_model(rng, 7, n_actions=3, alpha=0.95)
            policy, v = solve_optimal(model, method=method)
            Q = q_values(model, v)
            tol = 1e-8 if method == "policy-iteration" else 1e-5
            assert np.all(Q <= v[:, None] + tol)
            np.testing.assert_allclose(Q[np.arange(7), policy], v, atol=tol)

    def test_random_models_match_brute_force(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 6))
            model = random_model(rng, n)
            best, best_v = brute_force(model)
            policy, v = solve_optimal(model)
            np.testing.assert_array_equal(policy, best)
            np.testing.assert_allclose(v, best_v, atol=1e-9)

    def test_value_iteration_agrees_on_ground_truth(self, model1, truth):
        policy, v = solve_optimal(model1, method="value-iteration")
        np.testing.assert_array_equal(policy, truth.policy)
        assert np.abs(v - truth.values).max() < 1e-5

    def test_ground_truth_is_threshold(self, truth):
        # The faithful model intervenes on 1..23 and waits from 24 on.
        assert is_threshold(truth.policy) == 23

    def test_value_iteration_cap(self, model1):
        with pytest.raises(ConvergenceError):
            solve_optimal(model1, method="value-iteration", max_iter=5)

    def test_unknown_method(self):
        with pytest.raises(ValueError, match="unknown method"):
            solve_optimal(toy_model(), method="linear-programming")

    def test_greedy_tie_break_prefers_lower_action(self):
        model = MdpModel(np.stack([np.eye(2)] * 3), np.ones((2, 3)), 0.5)
        np.testing.assert_array_equal(greedy_policy(model, np.zeros(2)), [0, 0])
