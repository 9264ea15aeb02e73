"""Penalty functions applied to cumulative violation, and the running
violation state.

Two shapes are supported: quadratic  lam * V^2  and exponential
exp(lam * V) - 1.  Both are nonnegative, convex, increasing, and vanish
at V = 0; their derivative scales the constraint term of the surrogate
the learners descend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

# exp argument cap; a binding cap signals misconfiguration (the theorem
# tunings keep lam*V at O(log T)) and is surfaced via `saturates`.
EXP_CAP = 700.0


class PenaltyKind(Enum):
    QUADRATIC = "quadratic"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class Penalty:
    kind: PenaltyKind
    lam: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("penalty parameter must be positive and finite")

    def value(self, v: float) -> float:
        if v < 0:
            raise ValueError("cumulative violation must be >= 0")
        if self.kind is PenaltyKind.QUADRATIC:
            return self.lam * v * v
        return math.exp(min(self.lam * v, EXP_CAP)) - 1.0

    def prime(self, v: float) -> float:
        if v < 0:
            raise ValueError("cumulative violation must be >= 0")
        if self.kind is PenaltyKind.QUADRATIC:
            return 2.0 * self.lam * v
        return self.lam * math.exp(min(self.lam * v, EXP_CAP))

    def saturates(self, v: float) -> bool:
        return self.kind is PenaltyKind.EXPONENTIAL and self.lam * v > EXP_CAP


class PenaltyState:
    """Cumulative positive violation with delayed reads.

    `past(k)` returns the value V had k rounds ago; reads reaching before
    the first update return 0, matching the zero dual seed.  The full
    per-round history is kept (the optimistic learner reads up to 2m+1
    rounds back when assembling hints).
    """

    def __init__(self):
        self._values = [0.0]

    @property
    def v_now(self) -> float:
        return self._values[-1]

    def add(self, violation: float) -> float:
        """Accumulate one round's positive violation; returns the new V."""
        if violation < 0:
            raise ValueError("violation increment must be >= 0")
        self._values.append(self._values[-1] + violation)
        return self._values[-1]

    def past(self, k: int) -> float:
        """V as of k rounds ago (k = 0 is the current value)."""
        if k < 0:
            raise ValueError("lookback must be >= 0")
        idx = len(self._values) - 1 - k
        return self._values[idx] if idx >= 0 else 0.0


# ---------------------------------------------------------------------------
# Theorem-prescribed penalty parameters


def lambda_quadratic(horizon: int) -> float:
    """lam = 1/sqrt(T): the quadratic-penalty tuning for both problem
    variants."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return 1.0 / math.sqrt(horizon)


def lambda_exponential_short_memory(
    horizon: int, memory: int, diameter: float, l_f: float, l_g: float
) -> float:
    """lam = 0.5 / (sqrt(2T)*|X|*L_g + m^1.5*|X|*sqrt(T*L_f*L_g)): the
    exponential-penalty tuning for short memory windows."""
    denom = math.sqrt(2 * horizon) * diameter * l_g + memory**1.5 * diameter * math.sqrt(
        horizon * l_f * l_g
    )
    if not (denom > 0 and math.isfinite(denom)):
        raise ValueError("nonpositive or non-finite tuning denominator")
    return 0.5 / denom


def lambda_optimistic(
    error_g: float, g_bound: float, memory: int, regret_coeff: float
) -> float:
    """lam = 1 / (2 (C sqrt(E_T(g+)) + G (m+1))): the exponential-penalty
    tuning of the optimistic learner, given an estimate of the cumulative
    constraint prediction error."""
    if error_g < 0:
        raise ValueError("error estimate must be >= 0")
    denom = 2.0 * (regret_coeff * math.sqrt(error_g) + g_bound * (memory + 1))
    if not (denom > 0 and math.isfinite(denom)):
        raise ValueError("nonpositive or non-finite tuning denominator")
    return 1.0 / denom


def short_memory_condition(horizon: int, memory: int) -> bool:
    """m <= T^(1/6) / (log T)^(1/3): when the exponential tuning's CCV
    improvement applies."""
    if horizon < 2:
        return memory == 0
    return memory <= horizon ** (1.0 / 6.0) / math.log(horizon) ** (1.0 / 3.0)


@dataclass(frozen=True)
class LambdaSchedule:
    """Per-round penalty parameter.

    `fixed` uses one theorem-prescribed value for the whole run;
    `sqrt_t` uses lam_t = 1/sqrt(t), the time-varying variant used by the
    reference experiment.  Both are supported because the two appear in
    different places and are not reconciled; the fixed value is the
    default.
    """

    mode: str  # "fixed" | "sqrt_t"
    value: float = 0.0

    def at(self, t: int) -> float:
        if self.mode == "fixed":
            return self.value
        if self.mode == "sqrt_t":
            return 1.0 / math.sqrt(max(t, 1))
        raise ValueError(f"unknown lambda mode {self.mode!r}")
