"""Trajectory simulation and maximum-likelihood transition estimates."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .mdp import check_stochastic

ZERO_ROW_POLICIES = ("uniform", "self", "death")
MAX_STEPS = 10**6
BLOCK = 256


class SimulationError(RuntimeError):
    """A trajectory failed to reach an absorbing state within the step cap."""


def trajectory_rng(seed, key, m):
    """Independent generator for trajectory ``m`` under stream ``key``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(*map(int, key), int(m)))
    return np.random.Generator(np.random.PCG64(ss))


def cumulative_rows(tpm):
    """Row CDFs for inverse-transform sampling.

    Everything from the last positive entry of a row onward is set to
    exactly 1.0, so a uniform in ``[0, 1)`` never selects a zero-probability
    state.
    """
    P = check_stochastic(tpm, name="tpm")
    cum = np.cumsum(P, axis=1)
    for i, row in enumerate(P):
        cum[i, np.flatnonzero(row > 0.0)[-1] :] = 1.0
    return np.ascontiguousarray(cum)


def absorbing_states(tpm):
    P = np.asarray(tpm)
    return np.isclose(np.diag(P), 1.0, rtol=0.0, atol=1e-12)


@dataclass
class TrajectoryBatch:
    """Simulated paths plus what is needed to regenerate them.

    Trajectory ``m`` was driven by ``trajectory_rng(seed, key, m)``.
    """

    paths: list
    seed: int
    key: tuple = ()
    start: int = 0
    backend: str = field(default=kernels.BACKEND)

    @property
    def M(self):
        return len(self.paths)

    def seed_record(self):
        return {"seed": self.seed, "key": list(self.key), "derivation": "SeedSequence(seed, spawn_key=(*key, m))"}


def simulate_trajectories(tpm, M, seed, *, key=(), start=None, max_steps=MAX_STEPS):
    """Simulate ``M`` independent wait-action trajectories.

    Each trajectory starts at ``start`` (default: the highest non-absorbing
    state, ``J`` for the study chain) and runs until it first enters an
    absorbing state.

    Returns
    -------
    batch : TrajectoryBatch
    counts : ndarray of int64, shape (n, n)
        Observed transition counts over all trajectories.

    Raises
    ------
    SimulationError
        If a trajectory exceeds ``max_steps`` transitions.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    cum = cumulative_rows(tpm)
    n = cum.shape[0]
    absorbing = absorbing_states(tpm)
    if start is None:
        live = np.flatnonzero(~absorbing)
        if live.size == 0:
            raise ValueError("every state is absorbing")
        start = int(live[-1])
    absorbing_u8 = np.ascontiguousarray(absorbing, dtype=np.uint8)

    rngs = [trajectory_rng(seed, key, m) for m in range(M)]
    segments = [[np.array([start], dtype=np.int64)] for _ in range(M)]
    states = np.full(M, start, dtype=np.int64)
    active = np.arange(M)
    steps = 0
    while active.size:
        uniforms = np.stack([rngs[m].random(BLOCK) for m in active])
        paths = np.empty((active.size, BLOCK), dtype=np.int64)
        lengths = np.empty(active.size, dtype=np.int64)
        cur = np.ascontiguousarray(states[active])
        kernels.walk_batch(cum, absorbing_u8, cur, uniforms, paths, lengths)
        for row, m in enumerate(active):
            segments[m].append(paths[row, : lengths[row]].copy())
        states[active] = cur
        active = active[~absorbing[cur]]
        steps += BLOCK
        if active.size and steps >= max_steps:
            raise SimulationError(
                f"{active.size} trajectories still running after {max_steps} steps"
            )

    batch = TrajectoryBatch([np.concatenate(s) for s in segments], int(seed), tuple(key), start)
    return batch, count_transitions(batch.paths, n)


def count_transitions(paths, n_states):
    """Tally ``n[i, j]``, the number of observed ``i -> j`` transitions."""
    flat = np.zeros(n_states * n_states, dtype=np.int64)
    for path in paths:
        path = np.asarray(path, dtype=np.int64)
        if path.size > 1:
            flat += np.bincount(path[:-1] * n_states + path[1:], minlength=n_states * n_states)
    return flat.reshape(n_states, n_states)


def empty_rows(counts):
    """Interior rows with no observed transitions."""
    counts = np.asarray(counts)
    totals = counts.sum(axis=1)
    return np.flatnonzero(totals[1:-1] == 0) + 1


def _normalize(counts, zero_row):
    if zero_row not in ZERO_ROW_POLICIES:
        raise ValueError(f"zero_row must be one of {ZERO_ROW_POLICIES}, got {zero_row!r}")
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.shape[0]
    if counts.ndim != 2 or counts.shape[1] != n or n < 3:
        raise ValueError("counts must be a square matrix over at least 3 states")
    if (counts < 0).any():
        raise ValueError("counts must be nonnegative")
    totals = counts.sum(axis=1)
    P = np.zeros((n, n))
    seen = totals > 0
    P[seen] = counts[seen] / totals[seen, None]
    for h in np.flatnonzero(~seen):
        if zero_row == "uniform":
            P[h, : n - 1] = 1.0 / (n - 1)
        elif zero_row == "self":
            P[h, h] = 1.0
        else:
            P[h, 0] = 1.0
    P[0] = 0.0
    P[0, 0] = 1.0
    P[n - 1] = 0.0
    P[n - 1, n - 1] = 1.0
    return P


def mle_full(counts, zero_row="uniform"):
    """Row-normalized counts at full resolution.

    The end states are forced absorbing. Interior rows without observations
    follow ``zero_row``: ``"uniform"`` over states ``0..J``, ``"self"`` for a
    self-loop, ``"death"`` for a jump to 0.
    """
    return _normalize(counts, zero_row)


def pool_counts(counts, partition):
    """Sum counts over fibers in both axes (exact integer arithmetic)."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape[0] != partition.n_original:
        raise ValueError("counts and partition sizes disagree")
    starts = [lo for lo, _ in partition.bounds]
    return np.add.reduceat(np.add.reduceat(counts, starts, axis=0), starts, axis=1)


def mle_aggregated(counts, partition, zero_row="uniform"):
    """Pooled-count estimate on the aggregated state space."""
    return _normalize(pool_counts(counts, partition), zero_row)


def write_counts_csv(path, counts):
    """Write nonzero counts as ``i,j,count`` rows after a size comment."""
    counts = np.asarray(counts, dtype=np.int64)
    with open(path, "w", newline="") as fh:
        fh.write(f"# n_states={counts.shape[0]}\n")
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "count"])
        for i, j in zip(*np.nonzero(counts)):
            writer.writerow([int(i), int(j), int(counts[i, j])])


def read_counts_csv(path, n_states=None):
    """Inverse of :func:`write_counts_csv`.

    ``n_states`` overrides the size comment; without either, the size is
    one more than the largest index seen.
    """
    triples = []
    declared = None
    with open(path, newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "n_states":
                    declared = int(value)
                continue
            lines.append(line)
    for row in csv.DictReader(lines):
        i, j, c = int(row["i"]), int(row["j"]), int(row["count"])
        if i < 0 or j < 0 or c < 0:
            raise ValueError(f"negative entry in counts file: {row}")
        triples.append((i, j, c))
    n = n_states or declared
    if n is None:
        n = 1 + max((max(i, j) for i, j, _ in triples), default=-1)
    counts = np.zeros((n, n), dtype=np.int64)
    for i, j, c in triples:
        if i >= n or j >= n:
            raise ValueError(f"index ({i}, {j}) outside a {n}-state count matrix")
        counts[i, j] += c
    return counts
