import numpy as np
import pytest

from mdpagg import estimation, kernels
from mdpagg._walk_py import walk_batch as walk_python
from mdpagg.aggregation import Partition, build_partition
from mdpagg.estimation import (
    SimulationError,
    count_transitions,
    cumulative_rows,
    empty_rows,
    mle_aggregated,
    mle_full,
    pool_counts,
    read_counts_csv,
    simulate_trajectories,
    write_counts_csv,
)
from mdpagg.mdp import WAIT


def random_counts(rng, n, zero_rows=True, scale=20):
    counts = rng.poisson(rng.random((n, n)) * scale * rng.random((n, 1)))
    counts[0] = 0
    counts[-1] = 0
    if not zero_rows:
        counts[1:-1, 0] += 1
    return counts


class TestSimulate:
    def test_deterministic_two_state(self):
        P = np.array([[1.0, 0.0], [1.0, 0.0]])
        batch, counts = simulate_trajectories(P, 1, seed=0)
        np.testing.assert_array_equal(batch.paths[0], [1, 0])
        np.testing.assert_array_equal(counts, [[0, 0], [1, 0]])

    def test_same_seed_identical(self, model1):
        P = model1.transitions[WAIT]
        a = simulate_trajectories(P, 50, seed=11, key=(50, 3))[1]
        b = simulate_trajectories(P, 50, seed=11, key=(50, 3))[1]
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self, model1):
        P = model1.transitions[WAIT]
        a = simulate_trajectories(P, 50, seed=11, key=(50, 3))[1]
        assert not np.array_equal(a, simulate_trajectories(P, 50, seed=12, key=(50, 3))[1])
        assert not np.array_equal(a, simulate_trajectories(P, 50, seed=11, key=(50, 4))[1])

    def test_prefix_property(self, model1):
        # Trajectory m depends only on (seed, key, m), not on M.
        P = model1.transitions[WAIT]
        small, _ = simulate_trajectories(P, 5, seed=3)
        large, _ = simulate_trajectories(P, 20, seed=3)
        for a, b in zip(small.paths, large.paths):
            np.testing.assert_array_equal(a, b)

    def test_paths_start_at_J_and_end_at_death(self, model1):
        batch, counts = simulate_trajectories(model1.transitions[WAIT], 200, seed=5)
        assert batch.M == 200 and batch.start == 100
        for path in batch.paths:
            assert path[0] == 100 and path[-1] == 0
            assert np.all(path[1:-1] > 0)
        assert counts.sum() == sum(len(p) - 1 for p in batch.paths)
        np.testing.assert_array_equal(counts[0], 0)
        np.testing.assert_array_equal(counts[101], 0)
        np.testing.assert_array_equal(counts[:, 101], 0)

    def test_counts_match_paths(self, model1):
        batch, counts = simulate_trajectories(model1.transitions[WAIT], 30, seed=9)
        manual = np.zeros_like(counts)
        for path in batch.paths:
            for i, j in zip(path[:-1], path[1:]):
                manual[i, j] += 1
        np.testing.assert_array_equal(counts, manual)

    def test_frequencies_within_three_standard_errors(self, model1):
        P = model1.transitions[WAIT]
        _, counts = simulate_trajectories(P, 5000, seed=2023)
        visits = counts.sum(axis=1)
        rows = visits >= 30
        phat = counts[rows] / visits[rows, None]
        p = P[rows]
        se = np.sqrt(p * (1 - p) / visits[rows, None])
        z = np.abs(phat - p) / np.where(se > 0, se, np.inf)
        # Cells with p == 0 must never be observed.
        assert np.all(phat[p == 0] == 0)
        # With ~10^4 cells, a few 3-SE excursions are expected by chance alone.
        assert np.mean(z > 3) < 0.01

    def test_inverse_cdf_semantics(self):
        cum = cumulative_rows(np.array([[1.0, 0, 0], [0.25, 0.5, 0.25], [0, 0, 1.0]]))
        np.testing.assert_array_equal(cum[1], [0.25, 0.75, 1.0])
        absorbing = np.array([1, 0, 1], dtype=np.uint8)
        uniforms = np.array([[0.0, 0.0], [0.25, 0.0], [0.7499, 0.0], [0.75, 0.0]])
        paths = np.empty((4, 2), dtype=np.int64)
        lengths = np.empty(4, dtype=np.int64)
        states = np.ones(4, dtype=np.int64)
        kernels.walk_batch(cum, absorbing, states, uniforms, paths, lengths)
        np.testing.assert_array_equal(paths[:, 0], [0, 1, 1, 2])

    def test_zero_probability_tail_never_sampled(self):
        P = np.array([[1.0, 0, 0], [0.5, 0.5 - 1e-17, 0.0], [0, 0, 1.0]])
        cum = cumulative_rows(P)
        assert cum[1, 1] == 1.0 and cum[1, 2] == 1.0

    def test_step_cap(self):
        P = np.array([[1.0, 0, 0], [0, 0, 1.0], [0, 1.0, 0]])
        with pytest.raises(SimulationError, match="still running"):
            simulate_trajectories(P, 2, seed=0, max_steps=1000)

    def test_rejects_M(self, model1):
        with pytest.raises(ValueError):
            simulate_trajectories(model1.transitions[WAIT], 0, seed=0)

    def test_seed_record(self, model1):
        batch, _ = simulate_trajectories(model1.transitions[WAIT], 2, seed=4, key=(2, 1))
        assert batch.seed_record()["seed"] == 4
        assert batch.seed_record()["key"] == [2, 1]


class TestBackends:
    def test_python_and_default_agree(self, model1, monkeypatch):
        P = model1.transitions[WAIT]
        default = simulate_trajectories(P, 300, seed=77, key=(1,))[1]
        monkeypatch.setattr(kernels, "walk_batch", walk_python)
        python = simulate_trajectories(P, 300, seed=77, key=(1,))[1]
        np.testing.assert_array_equal(default, python)

    def test_kernel_level_agreement(self, rng):
        try:
            from mdpagg._walk import walk_batch as walk_cython
        except ImportError:
            pytest.skip("compiled kernel not built")
        P = rng.random((12, 12)) ** 4
        P[0] = 0
        P[0, 0] = 1
        P /= P.sum(axis=1, keepdims=True)
        cum = cumulative_rows(P)
        absorbing = estimation.absorbing_states(P).astype(np.uint8)
        uniforms = rng.random((40, 64))
        out = []
        for walk in (walk_cython, walk_python):
            states = np.full(40, 11, dtype=np.int64)
            paths = np.zeros((40, 64), dtype=np.int64)
            lengths = np.zeros(40, dtype=np.int64)
            walk(cum, absorbing, states, uniforms, paths, lengths)
            out.append((states.copy(), paths, lengths))
        for a, b in zip(*out):
            np.testing.assert_array_equal(a, b)


class TestMle:
    def test_row_normalization(self):
        counts = np.zeros((5, 5), dtype=int)
        counts[2, 1:3] = [3, 1]
        P = mle_full(counts)
        np.testing.assert_allclose(P[2], [0, 0.75, 0.25, 0, 0])

    def test_zero_row_policies(self):
        counts = np.zeros((5, 5), dtype=int)
        counts[1, 0] = 2
        np.testing.assert_allclose(mle_full(counts, "uniform")[3], [0.25, 0.25, 0.25, 0.25, 0])
        np.testing.assert_array_equal(mle_full(counts, "self")[3], [0, 0, 0, 1, 0])
        np.testing.assert_array_equal(mle_full(counts, "death")[3], [1, 0, 0, 0, 0])
        with pytest.raises(ValueError, match="zero_row"):
            mle_full(counts, "ignore")

    @pytest.mark.parametrize("policy", ["uniform", "self", "death"])
    def test_row_stochastic(self, rng, policy):
        for _ in range(20):
            counts = random_counts(rng, int(rng.integers(3, 30)))
            P = mle_full(counts, policy)
            assert np.abs(P.sum(axis=1) - 1).max() < 1e-12
            assert P[0, 0] == 1.0 and P[-1, -1] == 1.0
            partition = build_partition(P.shape[0] - 2, int(rng.integers(1, P.shape[0] - 1)))
            Q = mle_aggregated(counts, partition, policy)
            assert np.abs(Q.sum(axis=1) - 1).max() < 1e-12

    def test_three_state_consistency(self):
        P = np.array([[1.0, 0, 0, 0], [0.3, 0.5, 0.2, 0], [0.1, 0.3, 0.6, 0], [0, 0, 0, 1.0]])
        _, counts = simulate_trajectories(P, 4000, seed=1)
        P_hat = mle_full(counts)
        n = counts.sum(axis=1)
        for h in (1, 2):
            se = np.sqrt(P[h] * (1 - P[h]) / n[h])
            assert np.all(np.abs(P_hat[h] - P[h]) <= 3 * se + 1e-15)

    def test_identity_partition_exact(self, rng):
        for _ in range(20):
            counts = random_counts(rng, 12)
            np.testing.assert_array_equal(
                mle_aggregated(counts, Partition.identity(10)), mle_full(counts)
            )

    def test_pooled_hand_example(self):
        counts = np.array(
            [
                [0, 0, 0, 0, 0],
                [2, 1, 1, 0, 0],
                [0, 3, 1, 4, 0],
                [1, 0, 2, 1, 0],
                [0, 0, 0, 0, 0],
            ]
        )
        Q = mle_aggregated(counts, Partition(((0, 0), (1, 2), (3, 3), (4, 4))))
        # Superstate 1 pools rows 1-2: to 0: 2, to {1,2}: 6, to 3: 4 -> /12.
        np.testing.assert_allclose(Q[1], [2 / 12, 6 / 12, 4 / 12, 0])
        np.testing.assert_allclose(Q[2], [1 / 4, 2 / 4, 1 / 4, 0])
        np.testing.assert_array_equal(
            pool_counts(counts, Partition(((0, 0), (1, 2), (3, 3), (4, 4))))[1], [2, 6, 4, 0]
        )

    def test_pooling_reduces_empty_rows(self, model1):
        _, counts = simulate_trajectories(model1.transitions[WAIT], 10, seed=0)
        full = empty_rows(counts).size / 100
        assert full > 0
        for K in (5, 10, 20, 25, 50):
            pooled = empty_rows(pool_counts(counts, build_partition(100, K))).size / K
            assert pooled < full

    def test_pooled_equals_count_weighted_average(self, rng):
        for _ in range(20):
            counts = random_counts(rng, 14, zero_rows=False)
            partition = build_partition(12, int(rng.integers(1, 13)))
            P = mle_full(counts)
            E = partition.indicator()
            n = counts.sum(axis=1).astype(float)
            weighted = (E.T @ (n[:, None] * P) @ E)[1:-1] / (E.T @ n)[1:-1, None]
            Q = mle_aggregated(counts, partition)
            np.testing.assert_allclose(Q[1:-1], weighted, rtol=1e-12)


class TestCountsCsv:
    def test_round_trip(self, tmp_path, rng):
        counts = random_counts(rng, 9)
        path = tmp_path / "counts.csv"
        write_counts_csv(path, counts)
        text = path.read_text().splitlines()
        assert text[0] == "# n_states=9" and text[1] == "i,j,count"
        np.testing.assert_array_equal(read_counts_csv(path), counts)

    def test_size_inferred_without_comment(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("i,j,count\n1,0,3\n2,1,4\n")
        counts = read_counts_csv(path)
        assert counts.shape == (3, 3) and counts[2, 1] == 4
        assert read_counts_csv(path, n_states=6).shape == (6, 6)

    def test_out_of_range(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("i,j,count\n7,0,3\n")
        with pytest.raises(ValueError, match="outside"):
            read_counts_csv(path, n_states=4)

    def test_negative(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("i,j,count\n1,0,-3\n")
        with pytest.raises(ValueError, match="negative"):
            read_counts_csv(path)


def test_count_transitions_empty_paths():
    counts = count_transitions([np.array([3]), np.array([2, 1, 0])], 4)
    assert counts.sum() == 2 and counts[2, 1] == 1 and counts[1, 0] == 1
