"""Structural checks on transition matrices and stopping policies.

States are ordered from worst (0, absorbing failure) to best; the last
state is the absorbing post-intervention state. Policies are classified on
the interior states ``1..J`` only, and thresholds are in the
intervene-below form: intervene for ``h <= T``, wait above.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import INTERVENE, WAIT

DFR_TOL = 1e-12


def dfr_violation(matrix, tol=DFR_TOL):
    """First ``(i, n)`` where a partial row sum increases down the rows.

    The matrix is DFR when ``sum_{j<=n} p_ij`` is nonincreasing in ``i`` for
    every ``n``. Returns ``None`` when it is, else the violating pair with the
    smallest ``i`` (then smallest ``n``).
    """
    cum = np.cumsum(np.asarray(matrix, dtype=float), axis=1)
    bad = cum[1:] > cum[:-1] + tol
    if not bad.any():
        return None
    i, n = np.argwhere(bad)[0]
    return int(i) + 1, int(n)


def is_dfr(matrix, tol=DFR_TOL):
    return dfr_violation(matrix, tol) is None


def _interior(policy):
    policy = np.asarray(policy)
    if policy.ndim != 1 or policy.size < 3:
        raise ValueError("policy must cover at least one interior state")
    return policy[1:-1]


def is_threshold(policy):
    """Threshold ``T`` if the policy intervenes exactly on states ``1..T``.

    Returns ``0`` for an all-wait interior, ``J`` for all-intervene, and
    ``None`` when the interior policy is not of that form.
    """
    inner = _interior(policy)
    T = int(np.count_nonzero(inner == INTERVENE))
    expected = np.where(np.arange(1, inner.size + 1) <= T, INTERVENE, WAIT)
    if np.array_equal(inner, expected):
        return T
    return None


def threshold_policy(n_states, T):
    """Full-length policy intervening on interior states ``1..T``."""
    policy = np.zeros(n_states, dtype=np.intp)
    policy[1 : T + 1] = INTERVENE
    return policy


@dataclass(frozen=True)
class GrayAreaReport:
    """Boundaries of the region where an estimated policy alternates.

    ``lambda1`` is the intervene/gray boundary and ``lambda0`` the gray/wait
    boundary; ``gray_states`` are the states strictly between them.
    ``threshold`` is set exactly when ``gray_states`` is empty and the
    policy intervenes below it.
    """

    lambda1: int
    lambda0: int
    gray_states: tuple = ()
    threshold: int | None = None

    @property
    def size(self):
        return len(self.gray_states)


def gray_area(policy):
    """Gray-area decomposition of a two-action stopping policy.

    ``psi`` collects the interior switch points ``h`` with ``pi(h) = 1`` and
    ``pi(h + 1) = 0``. An empty ``psi`` drops out of the outer min/max.

    The only way to get an empty gray area without an intervene-to-wait
    switch is the two-state wait-then-intervene policy; it is reported with
    ``threshold=None`` since it is not of intervene-below form.

    Raises
    ------
    ValueError
        If the interior policy does not contain both actions.
    """
    inner = _interior(policy)
    states = np.arange(1, inner.size + 1)
    waits = states[inner == WAIT]
    intervenes = states[inner == INTERVENE]
    if waits.size == 0 or intervenes.size == 0:
        raise ValueError("gray area needs at least one wait and one intervene state")
    switch = (inner[:-1] == INTERVENE) & (inner[1:] == WAIT)
    psi = states[:-1][switch]

    lambda1 = int(waits.min())
    lambda0 = int(intervenes.max())
    if psi.size:
        lambda1 = min(lambda1, int(psi.min()))
        lambda0 = max(lambda0, int(psi.max()) + 1)
    gray = tuple(range(lambda1 + 1, lambda0))
    threshold = lambda1 if not gray and psi.size else None
    return GrayAreaReport(lambda1, lambda0, gray, threshold)


@dataclass
class ConditionReport:
    """Sufficient conditions for an optimal intervene-below threshold policy.

    ``violations`` maps a condition name (``"dfr"``, ``"partial_sum"``,
    ``"reward_ratio"``) to the first offending index tuple.
    """

    dfr_holds: bool
    partial_sum_condition_holds: bool
    reward_ratio_condition_holds: bool
    violations: dict = field(default_factory=dict)

    @property
    def all_hold(self):
        return (
            self.dfr_holds
            and self.partial_sum_condition_holds
            and self.reward_ratio_condition_holds
        )

    @property
    def first_violation(self):
        for name in ("dfr", "partial_sum", "reward_ratio"):
            if name in self.violations:
                return name, self.violations[name]
        return None


def check_threshold_conditions(model, tol=1e-12):
    """Check the three sufficient conditions on a two-action stopping model.

    With ``P`` the wait matrix and ``r1 = r(., 1)``, for interior
    ``h = 2..J``:

    1. ``P`` is DFR;
    2. ``sum_{l=1}^g p_{h,l} <= sum_{l=1}^g p_{h-1,l}`` for ``g = 1..h-1``;
    3. ``(r1(h) - r1(h-1)) / r1(h) <= alpha * (p_{h-1,0} - p_{h,0})``.

    Condition 3 is tested in the multiplied-out form and fails outright
    where ``r1(h) <= 0``.
    """
    P = model.transitions[WAIT]
    r1 = model.rewards[:, INTERVENE]
    J = model.n_states - 2
    violations = {}

    dfr = dfr_violation(P)
    if dfr is not None:
        violations["dfr"] = dfr

    cum = np.cumsum(P[:, 1:], axis=1)  # cum[h, g-1] = sum_{l=1}^g p_{h,l}
    for h in range(2, J + 1):
        g = np.arange(1, h)
        bad = cum[h, g - 1] > cum[h - 1, g - 1] + tol
        if bad.any():
            violations["partial_sum"] = (h, int(g[bad][0]))
            break

    for h in range(2, J + 1):
        rhs = model.alpha * (P[h - 1, 0] - P[h, 0])
        scale = max(1.0, abs(r1[h]))
        if r1[h] <= 0 or r1[h] - r1[h - 1] > rhs * r1[h] + tol * scale:
            violations["reward_ratio"] = (h,)
            break

    return ConditionReport(
        dfr_holds="dfr" not in violations,
        partial_sum_condition_holds="partial_sum" not in violations,
        reward_ratio_condition_holds="reward_ratio" not in violations,
        violations=violations,
    )


@dataclass
class AggregationPreconditionReport:
    """Fiber-size and reward-ratio hypotheses for threshold preservation.

    ``size_failures`` and ``reward_failures`` list the superstates ``k`` at
    which each hypothesis fails.
    """

    size_failures: list = field(default_factory=list)
    reward_failures: list = field(default_factory=list)

    @property
    def holds(self):
        return not self.size_failures and not self.reward_failures

    def __bool__(self):
        return self.holds


def check_aggregation_preconditions(model, partition, tol=1e-12):
    """Check the hypotheses under which aggregation keeps threshold optimality.

    For every interior superstate ``k = 2..K`` with fiber ``L_k``:

    * ``|L_{k-1}| == |L_k|``;
    * ``(rQ(k) - rQ(k-1)) / rQ(k) <= (r(m) - r(n)) / r(m)`` where
      ``m = min L_k``, ``n = max L_{k-1}`` and ``rQ`` is the fiber-mean
      intervention reward.
    """
    from .aggregation import aggregate_rewards

    if partition.n_original != model.n_states:
        raise ValueError("partition does not match the model's state space")
    r1 = model.rewards[:, INTERVENE]
    rQ = aggregate_rewards(model.rewards, partition)[:, INTERVENE]
    fibers = partition.fibers
    report = AggregationPreconditionReport()
    for k in range(2, partition.K + 1):
        prev, cur = fibers[k - 1], fibers[k]
        if len(prev) != len(cur):
            report.size_failures.append(k)
        m, n = cur[0], prev[-1]
        if rQ[k] <= 0 or r1[m] <= 0:
            report.reward_failures.append(k)
            continue
        lhs = (rQ[k] - rQ[k - 1]) / rQ[k]
        rhs = (r1[m] - r1[n]) / r1[m]
        if lhs > rhs + tol:
            report.reward_failures.append(k)
    return report
