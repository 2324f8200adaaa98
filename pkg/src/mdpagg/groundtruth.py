"""Ground-truth deteriorating chain with a stop-and-collect intervention.

States ``0..J+1``: 0 is the absorbing failure state, ``1..J`` are ordered
from worst to best, ``J+1`` is the absorbing post-intervention state.
Under *wait* the chain moves down by ``m`` states with probability
``mu * gamma**m``, up by ``m`` with ``mu * lam**m``, and stays put with
``mu``; the tails that would leave ``[0, J]`` are collapsed onto 0 and
``J``. Under *intervene* it jumps to ``J+1`` and collects a one-time reward
equal to the expected remaining lifetime.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .mdp import MdpModel

DESIGNS = ("1", "appendix-c")


@dataclass(frozen=True)
class ChainParams:
    """Parameters of the ground-truth chain and rewards.

    ``lam`` is derived from ``mu`` and ``gamma`` so that rows sum to one.
    """

    J: int = 100
    mu: float = 0.1
    gamma: float = 0.85
    alpha: float = 0.9975
    terminal_reward: float = 40.0

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 1:
            raise ValueError(f"J must be a positive integer, got {self.J}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (0.0 <= self.mu <= 1.0 and 0.0 <= self.gamma < 1.0):
            raise ValueError("need 0 <= mu <= 1 and 0 <= gamma < 1")
        denom = 1.0 - self.gamma - self.mu * self.gamma
        if denom <= 0.0:
            raise ValueError("1 - gamma - mu*gamma must be positive")
        lam = self.lam
        if not 0.0 <= lam < 1.0:
            raise ValueError(f"derived lambda={lam!r} is outside [0, 1)")
        if self.mu > 0 and abs(self.row_sum_identity() - 1.0) > 1e-10:
            raise ValueError("parameters violate the row-sum identity")

    @property
    def lam(self):
        return (1.0 - self.mu - self.gamma) / (1.0 - self.gamma - self.mu * self.gamma)

    def row_sum_identity(self):
        """``mu (1 - gamma lam) / ((1 - gamma)(1 - lam))``; equals 1 when valid."""
        lam = self.lam
        return self.mu * (1.0 - self.gamma * lam) / ((1.0 - self.gamma) * (1.0 - lam))

    @classmethod
    def design(cls, name="1", **overrides):
        """Named parameter sets: ``"1"`` (terminal reward 40) or ``"appendix-c"`` (30)."""
        name = str(name)
        if name == "1":
            base = cls()
        elif name == "appendix-c":
            base = cls(terminal_reward=30.0)
        else:
            raise ValueError(f"unknown design {name!r}; choose from {DESIGNS}")
        return cls(**{**asdict(base), **overrides}) if overrides else base

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown chain parameter(s): {sorted(unknown)}")
        return cls(**data)


def build_natural_tpm(params):
    """Wait-action matrix, shape ``(J+2, J+2)``, geometric tails in closed form."""
    J, mu, gamma, lam = params.J, params.mu, params.gamma, params.lam
    n = J + 2
    P = np.zeros((n, n))
    P[0, 0] = 1.0
    P[J + 1, J + 1] = 1.0
    for i in range(1, J + 1):
        P[i, 0] = mu * gamma**i / (1.0 - gamma)
        down = np.arange(1, i)
        P[i, down] = mu * gamma ** (i - down)
        P[i, i] = mu
        up = np.arange(i + 1, J)
        P[i, up] = mu * lam ** (up - i)
        # Column J absorbs the upper tail; for i == J it replaces the diagonal.
        P[i, J] = mu * lam ** (J - i) / (1.0 - lam)
    return P


def build_intervention_tpm(J):
    """Intervene: every live state jumps to ``J+1``; 0 and ``J+1`` absorb."""
    if J < 1:
        raise ValueError("J must be at least 1")
    P = np.zeros((J + 2, J + 2))
    P[0, 0] = 1.0
    P[1:, J + 1] = 1.0
    return P


def build_rewards(params, natural_tpm):
    """Reward matrix ``(J+2, 2)``.

    Waiting earns one month in every live state. The intervention reward is
    ``terminal_reward`` at ``J`` and follows the downward recursion
    ``r(h,1) = (1 - alpha (p_{h,0} - p_{h+1,0})) r(h+1,1)``.
    """
    J = params.J
    P = np.asarray(natural_tpm)
    r = np.zeros((J + 2, 2))
    r[1 : J + 1, 0] = 1.0
    r[J, 1] = params.terminal_reward
    for h in range(J - 1, 0, -1):
        r[h, 1] = (1.0 - params.alpha * (P[h, 0] - P[h + 1, 0])) * r[h + 1, 1]
    return r


def build_model(params):
    """Assemble the two-action ground-truth :class:`~mdpagg.mdp.MdpModel`."""
    P0 = build_natural_tpm(params)
    P1 = build_intervention_tpm(params.J)
    return MdpModel(np.stack([P0, P1]), build_rewards(params, P0), params.alpha)
