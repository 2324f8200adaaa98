"""Order-preserving state aggregation of stopping MDPs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import MdpModel, WAIT


@dataclass(frozen=True)
class Partition:
    """Contiguous fibers ``L_0..L_{K+1}`` of the original states ``0..J+1``.

    ``bounds`` holds one inclusive ``(lo, hi)`` pair per superstate, in
    order. The end states 0 and ``J+1`` must be singleton fibers.
    """

    bounds: tuple

    def __post_init__(self):
        bounds = tuple((int(lo), int(hi)) for lo, hi in self.bounds)
        if len(bounds) < 3:
            raise ValueError("a partition needs at least one interior superstate")
        expected = 0
        for lo, hi in bounds:
            if lo != expected or hi < lo:
                raise ValueError(f"fibers must be contiguous and ascending: {bounds}")
            expected = hi + 1
        if bounds[0] != (0, 0) or bounds[-1][0] != bounds[-1][1]:
            raise ValueError("absorbing end states must be singleton fibers")
        object.__setattr__(self, "bounds", bounds)

    @property
    def K(self):
        return len(self.bounds) - 2

    @property
    def J(self):
        return self.bounds[-1][0] - 1

    @property
    def n_original(self):
        return self.bounds[-1][1] + 1

    @property
    def n_aggregated(self):
        return len(self.bounds)

    @property
    def fibers(self):
        return [np.arange(lo, hi + 1) for lo, hi in self.bounds]

    @property
    def sizes(self):
        return np.array([hi - lo + 1 for lo, hi in self.bounds])

    @property
    def labels(self):
        """The aggregation map ``s``: superstate index of each original state."""
        return np.repeat(np.arange(self.n_aggregated), self.sizes)

    @property
    def cutoffs(self):
        """Largest original state of each interior fiber."""
        return [hi for _, hi in self.bounds[1:-1]]

    def indicator(self):
        """0/1 matrix ``E`` with ``E[h, k] = 1`` iff ``h`` lies in ``L_k``."""
        E = np.zeros((self.n_original, self.n_aggregated))
        E[np.arange(self.n_original), self.labels] = 1.0
        return E

    def to_list(self):
        return [list(b) for b in self.bounds]

    @classmethod
    def from_list(cls, bounds):
        return cls(tuple(tuple(b) for b in bounds))

    @classmethod
    def identity(cls, J):
        return cls(tuple((h, h) for h in range(J + 2)))


def build_partition(J, K):
    """Split ``1..J`` into ``K`` consecutive fibers by the division rule.

    With ``J = qK + r``, the lowest ``K - r`` superstates hold ``q`` states
    and the highest ``r`` hold ``q + 1``.
    """
    if not 1 <= K <= J:
        raise ValueError(f"need 1 <= K <= J, got K={K}, J={J}")
    q, r = divmod(J, K)
    sizes = [q] * (K - r) + [q + 1] * r
    bounds = [(0, 0)]
    lo = 1
    for size in sizes:
        bounds.append((lo, lo + size - 1))
        lo += size
    bounds.append((J + 1, J + 1))
    return Partition(tuple(bounds))


def modified_stationary(tpm):
    """Stationary distribution of the chain with absorbing rows spread out.

    Every absorbing row ``h`` is replaced by ``1 / (n - 1)`` on each other
    state before solving ``beta P' = beta``, ``sum(beta) = 1``.

    Raises
    ------
    ValueError
        If the modified chain has no unique stationary distribution.
    """
    P = np.array(tpm, dtype=float)
    n = P.shape[0]
    absorbing = np.isclose(np.diag(P), 1.0, rtol=0.0, atol=1e-12)
    if n > 1:
        P[absorbing] = 1.0 / (n - 1)
        idx = np.flatnonzero(absorbing)
        P[idx, idx] = 0.0
    A = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    beta, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < n or np.abs(A @ beta - b).max() > 1e-10:
        raise ValueError("modified chain has no unique stationary distribution")
    if beta.min() < -1e-12:
        raise ValueError("stationary solve produced negative weights")
    beta = np.clip(beta, 0.0, None)
    return beta / beta.sum()


def aggregate_tpm(tpm, beta, partition):
    """Weighted aggregation of one transition matrix.

    ``q_{kk'} = sum_{h in L_k} beta_h sum_{h' in L_k'} p_{hh'} / sum_{h in L_k} beta_h``
    """
    P = np.asarray(tpm, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if P.shape[0] != partition.n_original or beta.shape != (P.shape[0],):
        raise ValueError("matrix, weights and partition sizes disagree")
    E = partition.indicator()
    weight = E.T @ beta
    if np.any(weight <= 0.0):
        k = int(np.flatnonzero(weight <= 0.0)[0])
        raise ValueError(f"fiber {k} has zero total weight")
    return (E.T @ (beta[:, None] * P) @ E) / weight[:, None]


def aggregate_rewards(rewards, partition):
    """Unweighted mean reward over each fiber, per action."""
    R = np.asarray(rewards, dtype=float)
    E = partition.indicator()
    return (E.T @ R) / partition.sizes[:, None]


def unaggregate_policy(policy, partition):
    """Give every original state the action of its superstate."""
    policy = np.asarray(policy)
    if policy.shape != (partition.n_aggregated,):
        raise ValueError("policy length does not match the partition")
    return policy[partition.labels]


def aggregate_model(model, partition, beta=None):
    """Aggregate every action's matrix with the wait-chain weights.

    ``beta`` defaults to :func:`modified_stationary` of the wait matrix.
    A deterministic jump to the top absorbing state stays a deterministic
    jump to the top superstate.
    """
    if beta is None:
        beta = modified_stationary(model.transitions[WAIT])
    Q = np.stack([aggregate_tpm(P, beta, partition) for P in model.transitions])
    return MdpModel(Q, aggregate_rewards(model.rewards, partition), model.alpha)
