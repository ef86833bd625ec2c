"""Closed-form privacy -> stability -> generalization bounds."""
from __future__ import annotations

import math
from typing import NamedTuple


def dp_stability_bound(epsilon: float) -> float:
    """RO-stability rate e^eps - 1 implied by eps-differential privacy."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    return math.expm1(epsilon)


def gap_bound_from_stability(eps_stable: float) -> float:
    """A mechanism that is RO-stable at rate r has |generalization gap| <= r."""
    if eps_stable < 0:
        raise ValueError("stability rate must be non-negative")
    return float(eps_stable)


def generalization_bound(epsilon: float) -> float:
    return gap_bound_from_stability(dp_stability_bound(epsilon))


class TailBound(NamedTuple):
    bound: float
    raw: float

    @property
    def vacuous(self) -> bool:
        return self.raw >= 1.0


def mcdiarmid_tail(t: float, m: int, epsilon: float) -> TailBound:
    """P(|U - U_hat| >= t) <= 2 exp(-2 t^2 / (m eps^2)); ``bound`` is capped at 1."""
    if t <= 0 or m < 1 or epsilon <= 0:
        raise ValueError("mcdiarmid_tail needs t > 0, m >= 1 and epsilon > 0")
    raw = 2.0 * math.exp(-2.0 * t * t / (m * epsilon * epsilon))
    return TailBound(min(1.0, raw), raw)
