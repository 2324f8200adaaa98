"""Replication study: simulate, estimate, aggregate, solve, score.

For every trajectory count ``M`` and replication ``r`` one count matrix is
simulated from the ground truth. Every aggregation level ``K`` is estimated
from that same matrix, solved, expanded back to the full state space, and
scored by its expected regret in the ground-truth model.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from . import __version__, kernels
from .aggregation import Partition, aggregate_rewards, build_partition, unaggregate_policy
from .estimation import (
    ZERO_ROW_POLICIES,
    empty_rows,
    mle_aggregated,
    mle_full,
    pool_counts,
    simulate_trajectories,
)
from .groundtruth import ChainParams, build_intervention_tpm, build_model
from .mdp import INTERVENE, WAIT, MdpModel, evaluate_policy, solve_optimal
from .structure import gray_area, is_threshold, threshold_policy

THRESHOLD_CRITERIA = ("start", "mean")

RESULT_COLUMNS = [
    "M",
    "K",
    "r",
    "threshold_assumed",
    "lambda1",
    "lambda0",
    "gray_size",
    "threshold_or_empty",
    "regret_months",
    "regret_per_thousand",
]


@dataclass
class ExperimentConfig:
    """Grid and options for :func:`run_experiment`.

    ``share_data_across_K`` reuses one simulated count matrix for every
    ``K`` at a given ``(M, r)``; ``threshold_criterion`` picks how
    threshold policies are compared (value at the start state, or mean
    value over interior states).
    """

    chain: ChainParams = field(default_factory=ChainParams)
    M_list: tuple = (10, 25, 50, 100, 500, 1000)
    K_list: tuple = (5, 10, 20, 25, 50, 100)
    R: int = 100
    seed: int = 20230
    threshold_assumption: bool = False
    zero_row_policy: str = "uniform"
    share_data_across_K: bool = True
    threshold_criterion: str = "start"

    def __post_init__(self):
        if isinstance(self.chain, dict):
            self.chain = ChainParams.from_dict(self.chain)
        self.M_list = tuple(int(m) for m in self.M_list)
        self.K_list = tuple(int(k) for k in self.K_list)
        self.validate()

    def validate(self):
        J = self.chain.J
        if not self.M_list or min(self.M_list) < 1:
            raise ValueError("M_list must contain positive trajectory counts")
        if not self.K_list:
            raise ValueError("K_list must not be empty")
        bad = [k for k in self.K_list if not 1 <= k <= J]
        if bad:
            raise ValueError(f"every K must satisfy 1 <= K <= J={J}; got {bad}")
        if int(self.R) < 1:
            raise ValueError("R must be at least 1")
        if int(self.seed) < 0:
            raise ValueError("seed must be nonnegative")
        if self.zero_row_policy not in ZERO_ROW_POLICIES:
            raise ValueError(f"zero_row_policy must be one of {ZERO_ROW_POLICIES}")
        if self.threshold_criterion not in THRESHOLD_CRITERIA:
            raise ValueError(f"threshold_criterion must be one of {THRESHOLD_CRITERIA}")
        if not isinstance(self.threshold_assumption, bool):
            raise ValueError("threshold_assumption must be true or false")

    def to_dict(self):
        d = asdict(self)
        d["M_list"] = list(self.M_list)
        d["K_list"] = list(self.K_list)
        return d

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config field(s): {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ReplicationResult:
    """Outcome of one ``(M, K, r)`` cell.

    Value vectors are indexed by original state: ``values_estimated`` and
    ``values_never`` are the estimated model's values of the chosen policy
    and of never intervening, expanded over fibers; ``values_true`` is the
    chosen policy evaluated in the ground truth.
    """

    M: int
    K: int
    r: int
    threshold_assumed: bool
    policy_aggregated: np.ndarray
    policy: np.ndarray
    gray: object
    threshold: int | None
    regret: float
    values_estimated: np.ndarray
    values_never: np.ndarray
    values_true: np.ndarray
    empty_rows: int = 0

    def row(self):
        g = self.gray
        return {
            "M": self.M,
            "K": self.K,
            "r": self.r,
            "threshold_assumed": self.threshold_assumed,
            "lambda1": "" if g is None else g.lambda1,
            "lambda0": "" if g is None else g.lambda0,
            "gray_size": "" if g is None else g.size,
            "threshold_or_empty": "" if self.threshold is None else self.threshold,
            "regret_months": self.regret,
            "regret_per_thousand": 1000.0 * self.regret,
        }


@dataclass
class Truth:
    """Ground-truth model with its optimal policy and values, computed once."""

    params: ChainParams
    model: MdpModel
    policy: np.ndarray
    values: np.ndarray

    @classmethod
    def from_params(cls, params):
        model = build_model(params)
        policy, values = solve_optimal(model)
        return cls(params, model, policy, values)


def expected_regret(policy, truth, optimal_values=None):
    """Value lost at the start state ``J`` by following ``policy`` in ``truth``.

    ``optimal_values`` may be passed to skip re-solving the truth. Returned
    in life-months per trajectory.
    """
    if optimal_values is None:
        _, optimal_values = solve_optimal(truth)
    start = truth.n_states - 2
    return float(optimal_values[start] - evaluate_policy(truth, policy)[start])


def best_threshold_policy(model, criterion="start"):
    """Best intervene-below threshold policy by enumeration over ``T = 0..K``.

    ``criterion="start"`` compares values at the top interior state (where
    trajectories start); ``"mean"`` compares the mean over interior states.
    Ties go to the smaller ``T``.
    """
    if criterion not in THRESHOLD_CRITERIA:
        raise ValueError(f"criterion must be one of {THRESHOLD_CRITERIA}")
    n = model.n_states
    K = n - 2
    best_policy, best_score = None, -np.inf
    for T in range(K + 1):
        policy = threshold_policy(n, T)
        v = evaluate_policy(model, policy)
        score = v[K] if criterion == "start" else v[1 : K + 1].mean()
        if best_policy is None or score > best_score + 1e-10 * max(1.0, abs(best_score)):
            best_policy, best_score = policy, score
    return best_policy


def estimated_model(counts, K, rewards, alpha, zero_row="uniform"):
    """Estimated MDP at aggregation level ``K`` and its partition.

    Only the wait matrix is estimated from ``counts``; the full-resolution
    ``rewards`` and the intervention jump are known inputs.
    """
    J = counts.shape[0] - 2
    if K == J:
        partition = Partition.identity(J)
        P0 = mle_full(counts, zero_row)
    else:
        partition = build_partition(J, K)
        P0 = mle_aggregated(counts, partition, zero_row)
        rewards = aggregate_rewards(rewards, partition)
    model = MdpModel(np.stack([P0, build_intervention_tpm(K)]), rewards, alpha)
    return model, partition


def solve_cell(counts, K, config, truth, r, M):
    """Estimate, solve and score one ``(M, K, r)`` cell."""
    params = config.chain
    model, partition = estimated_model(
        counts, K, truth.model.rewards, params.alpha, config.zero_row_policy
    )
    if config.threshold_assumption:
        policy_K = best_threshold_policy(model, config.threshold_criterion)
        values_K = evaluate_policy(model, policy_K)
    else:
        policy_K, values_K = solve_optimal(model)
    never_K = evaluate_policy(model, np.zeros(model.n_states, dtype=np.intp))
    policy = unaggregate_policy(policy_K, partition)

    inner = policy[1:-1]
    gray = None
    if (inner == WAIT).any() and (inner == INTERVENE).any():
        gray = gray_area(policy)
        threshold = gray.threshold
    else:
        threshold = is_threshold(policy)

    labels = partition.labels
    values_true = evaluate_policy(truth.model, policy)
    start = params.J
    return ReplicationResult(
        M=M,
        K=K,
        r=r,
        threshold_assumed=config.threshold_assumption,
        policy_aggregated=policy_K,
        policy=policy,
        gray=gray,
        threshold=threshold,
        regret=float(truth.values[start] - values_true[start]),
        values_estimated=values_K[labels],
        values_never=never_K[labels],
        values_true=values_true,
        empty_rows=int(empty_rows(pool_counts(counts, partition)).size),
    )


def _run_block(args):
    config, truth, M, r = args
    P0 = truth.model.transitions[WAIT]
    out = []
    shared = None
    if config.share_data_across_K:
        _, shared = simulate_trajectories(P0, M, config.seed, key=(M, r))
    for K in config.K_list:
        counts = shared
        if counts is None:
            _, counts = simulate_trajectories(P0, M, config.seed, key=(M, r, K))
        try:
            out.append(solve_cell(counts, K, config, truth, r, M))
        except Exception as exc:
            raise RuntimeError(f"cell M={M}, K={K}, r={r} failed: {exc}") from exc
    return out


def run_experiment(config, jobs=1):
    """Run every ``(M, K, r)`` cell of ``config``.

    Trajectory streams depend on ``(seed, M, r)`` (and ``K`` when data is
    not shared), so results are identical for any ``jobs``. Returned sorted
    by ``(M, K, r)``.
    """
    truth = Truth.from_params(config.chain)
    tasks = [(config, truth, M, r) for M in config.M_list for r in range(int(config.R))]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            blocks = list(pool.map(_run_block, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        blocks = [_run_block(t) for t in tasks]
    results = [res for block in blocks for res in block]
    results.sort(key=lambda res: (res.threshold_assumed, res.M, res.K, res.r))
    return results


def results_frame(results):
    return pd.DataFrame([res.row() for res in results], columns=RESULT_COLUMNS)


def summarize(results):
    """Summary tables keyed by ``(threshold_assumed, M, K)``.

    Returns a dict of DataFrames:

    ``regret``
        mean, spread and quantiles of regret per cell, in months and per
        thousand trajectories.
    ``frequency``
        per interior state, the fraction of replications that intervene.
    ``thresholds``
        histogram counts of the gray-area boundaries ``lambda1``/``lambda0``.
    ``lifetime``
        per interior state, mean and normal 95% interval of the estimated
        value under the chosen policy and under never intervening.
    """
    keys = ["threshold_assumed", "M", "K"]
    groups = {}
    for res in results:
        groups.setdefault((res.threshold_assumed, res.M, res.K), []).append(res)

    regret_rows, freq_rows, thr_rows, life_rows = [], [], [], []
    for key in sorted(groups):
        cell = groups[key]
        base = dict(zip(keys, key))
        xi = np.array([res.regret for res in cell])
        n = xi.size
        sem = xi.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
        q = np.quantile(xi, [0.05, 0.25, 0.5, 0.75, 0.95])
        regret_rows.append(
            {
                **base,
                "n": n,
                "mean": xi.mean(),
                "std": xi.std(ddof=1) if n > 1 else 0.0,
                "sem": sem,
                "min": xi.min(),
                "q05": q[0],
                "q25": q[1],
                "median": q[2],
                "q75": q[3],
                "q95": q[4],
                "max": xi.max(),
                "mean_per_thousand": 1000.0 * xi.mean(),
                "threshold_rate": np.mean([res.threshold is not None for res in cell]),
            }
        )

        policies = np.stack([res.policy[1:-1] for res in cell])
        freq = (policies == INTERVENE).mean(axis=0)
        for h, f in enumerate(freq, start=1):
            freq_rows.append({**base, "state": h, "intervene_frequency": f})

        for which in ("lambda1", "lambda0"):
            vals = [getattr(res.gray, which) for res in cell if res.gray is not None]
            for state, count in zip(*np.unique(vals, return_counts=True)) if vals else ():
                thr_rows.append({**base, "boundary": which, "state": int(state), "count": int(count)})

        for label, attr in (("optimal", "values_estimated"), ("never", "values_never")):
            V = np.stack([getattr(res, attr)[1:-1] for res in cell])
            mean = V.mean(axis=0)
            se = V.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
            for h in range(mean.size):
                life_rows.append(
                    {
                        **base,
                        "policy": label,
                        "state": h + 1,
                        "mean": mean[h],
                        "low": mean[h] - 1.96 * se[h],
                        "high": mean[h] + 1.96 * se[h],
                    }
                )

    return {
        "regret": pd.DataFrame(regret_rows),
        "frequency": pd.DataFrame(freq_rows),
        "thresholds": pd.DataFrame(
            thr_rows, columns=keys + ["boundary", "state", "count"]
        ),
        "lifetime": pd.DataFrame(life_rows),
    }


def metadata(config, jobs=1):
    return {
        "code_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "seed": int(config.seed),
        "zero_row_policy": config.zero_row_policy,
        "regret_state": "J (start state), life-months; per_thousand = x1000",
        "threshold_criterion": config.threshold_criterion,
        "share_data_across_K": config.share_data_across_K,
        "seed_derivation": "SeedSequence(seed, spawn_key=(M, r[, K], m)) per trajectory m",
        "config": config.to_dict(),
    }
