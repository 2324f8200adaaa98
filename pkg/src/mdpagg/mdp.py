"""Finite-state, infinite-horizon discounted MDPs with two or more actions.

Transition matrices are stored as an ``(A, S, S)`` array and rewards as an
``(S, A)`` array, so ``transitions[a, h, h2]`` is the probability of moving
from ``h`` to ``h2`` under action ``a``. Action 0 is *wait*, action 1 is
*intervene*.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WAIT = 0
INTERVENE = 1

STOCHASTIC_TOL = 1e-10


class ConvergenceError(RuntimeError):
    """Raised when value iteration hits its iteration cap."""


def check_stochastic(matrix, tol=STOCHASTIC_TOL, name="matrix"):
    """Raise ``ValueError`` unless ``matrix`` is square and row-stochastic."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{name} must be square, got shape {matrix.shape}")
    if np.any(matrix < -tol) or np.any(matrix > 1 + tol):
        raise ValueError(f"{name} has entries outside [0, 1]")
    sums = matrix.sum(axis=1)
    worst = int(np.argmax(np.abs(sums - 1.0)))
    if abs(sums[worst] - 1.0) > tol:
        raise ValueError(f"{name} row {worst} sums to {sums[worst]!r}, not 1")
    return matrix


@dataclass(frozen=True, eq=False)
class MdpModel:
    """A discounted MDP ``(S, A, P, R, alpha)``.

    Parameters
    ----------
    transitions : ndarray, shape (A, S, S)
        One row-stochastic matrix per action.
    rewards : ndarray, shape (S, A)
        Immediate reward for each state-action pair.
    alpha : float
        Discount factor in (0, 1).
    """

    transitions: np.ndarray
    rewards: np.ndarray
    alpha: float

    def __post_init__(self):
        P = np.array(self.transitions, dtype=float)
        R = np.array(self.rewards, dtype=float)
        if P.ndim != 3:
            raise ValueError("transitions must have shape (A, S, S)")
        n_actions, n_states = P.shape[0], P.shape[1]
        if R.shape != (n_states, n_actions):
            raise ValueError(
                f"rewards shape {R.shape} does not match ({n_states}, {n_actions})"
            )
        for a in range(n_actions):
            check_stochastic(P[a], name=f"transition matrix for action {a}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not np.all(np.isfinite(R)):
            raise ValueError("rewards must be finite")
        P.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "rewards", R)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def n_states(self):
        return self.transitions.shape[1]

    @property
    def n_actions(self):
        return self.transitions.shape[0]

    def policy_matrix(self, policy):
        """Return ``(P_pi, r_pi)`` for a deterministic stationary policy."""
        policy = self._check_policy(policy)
        states = np.arange(self.n_states)
        return self.transitions[policy, states, :], self.rewards[states, policy]

    def _check_policy(self, policy):
        policy = np.asarray(policy)
        if policy.shape != (self.n_states,):
            raise ValueError(
                f"policy has shape {policy.shape}, model has {self.n_states} states"
            )
        if policy.size and (policy.min() < 0 or policy.max() >= self.n_actions):
            raise ValueError("policy contains an invalid action")
        return policy.astype(np.intp)


def evaluate_policy(model, policy):
    """Value of a deterministic stationary policy.

    Solves ``(I - alpha P_pi) v = r_pi`` exactly. The system is nonsingular
    for every ``alpha < 1`` since ``P_pi`` is stochastic. Self-absorbing
    states are solved in closed form, ``r / (1 - alpha)``, so a zero-reward
    absorbing state has value exactly 0.
    """
    P_pi, r_pi = model.policy_matrix(policy)
    alpha = model.alpha
    fixed = np.diag(P_pi) == 1.0
    v = np.where(fixed, r_pi / (1.0 - alpha), 0.0)
    free = ~fixed
    if free.any():
        A = np.eye(int(free.sum())) - alpha * P_pi[np.ix_(free, free)]
        b = r_pi[free] + alpha * P_pi[np.ix_(free, fixed)] @ v[fixed]
        v[free] = np.linalg.solve(A, b)
    return v


def q_value(model, values, h, a):
    """One-step lookahead ``r(h, a) + alpha * sum_h' p^a_{hh'} v(h')``."""
    values = np.asarray(values, dtype=float)
    return float(model.rewards[h, a] + model.alpha * model.transitions[a, h] @ values)


def q_values(model, values):
    """All one-step lookahead values, shape ``(S, A)``."""
    values = np.asarray(values, dtype=float)
    return model.rewards + model.alpha * (model.transitions @ values).T


def greedy_policy(model, values):
    """Greedy policy with respect to ``values``; ties go to the lowest action.

    Two q-values within ``1e-10`` (relative to their scale) count as tied.
    """
    q = q_values(model, values)
    tol = 1e-10 * max(1.0, float(np.abs(q).max()))
    policy = np.zeros(model.n_states, dtype=np.intp)
    best = q[:, 0].copy()
    for a in range(1, model.n_actions):
        better = q[:, a] > best + tol
        policy[better] = a
        best[better] = q[better, a]
    return policy


def solve_optimal(model, method="policy-iteration", epsilon=1e-6, max_iter=100_000):
    """Optimal deterministic stationary policy and its value function.

    Parameters
    ----------
    model : MdpModel
    method : {"policy-iteration", "value-iteration"}
        Policy iteration with exact evaluation is the default. Value
        iteration stops once the span of successive differences drops below
        ``epsilon * (1 - alpha) / (2 * alpha)``.
    epsilon : float
        Value-iteration accuracy target.
    max_iter : int
        Cap on value-iteration sweeps; :class:`ConvergenceError` beyond it.

    Returns
    -------
    policy : ndarray of int, shape (S,)
        Argmax ties are broken toward action 0 (wait).
    values : ndarray, shape (S,)
    """
    if method == "policy-iteration":
        return _policy_iteration(model)
    if method == "value-iteration":
        return _value_iteration(model, epsilon, max_iter)
    raise ValueError(f"unknown method {method!r}")


def _policy_iteration(model):
    policy = np.zeros(model.n_states, dtype=np.intp)
    states = np.arange(model.n_states)
    # Strict improvement bounds this by the number of policies; in practice a handful.
    while True:
        values = evaluate_policy(model, policy)
        q = q_values(model, values)
        current = q[states, policy]
        tol = 1e-10 * max(1.0, float(np.abs(q).max()))
        candidate = greedy_policy(model, values)
        # Only switch where the improvement is strict, which guarantees termination.
        improve = q[states, candidate] > current + tol
        if not improve.any():
            break
        policy = np.where(improve, candidate, policy)
    final = greedy_policy(model, values)
    if not np.array_equal(final, policy):
        values = evaluate_policy(model, final)
    return final, values


def _value_iteration(model, epsilon, max_iter):
    alpha = model.alpha
    threshold = epsilon * (1.0 - alpha) / (2.0 * alpha)
    v = np.zeros(model.n_states)
    for _ in range(max_iter):
        v_next = q_values(model, v).max(axis=1)
        diff = v_next - v
        lo, hi = diff.min(), diff.max()
        v = v_next
        if hi - lo < threshold:
            # Midpoint of the standard span bounds on v*.
            v = v + alpha / (1.0 - alpha) * 0.5 * (lo + hi)
            return greedy_policy(model, v), v
    raise ConvergenceError(f"value iteration did not converge in {max_iter} sweeps")
