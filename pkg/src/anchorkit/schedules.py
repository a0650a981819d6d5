"""Anchor-coefficient families beta(t) / beta_k and their contraction speed.

The contraction function C(t) = exp(integral of beta) measures how fast the
anchor term alone pulls the flow toward its anchor; each family below ships
the closed form whose log-derivative is beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AdaptiveNeedsState, ConfigError, NonpositiveDenominator

POWER_LAW = "power_law"
STRONGLY_MONOTONE = "strongly_monotone"
ADAPTIVE = "adaptive"
NONE = "none"

FAMILIES = (POWER_LAW, STRONGLY_MONOTONE, ADAPTIVE, NONE)

# p = 1 selects the t^gamma contraction branch; the two closed forms are not
# continuous in p at p = 1, and callers choose p exactly.
_P_ONE_TOL = 1e-12

# Squared-norm tolerance under which a residual counts as exactly zero.
ZERO_RESIDUAL_SQ = 1e-24


@dataclass(frozen=True)
class AnchorSchedule:
    family: str
    gamma: Optional[float] = None
    p: Optional[float] = None
    mu: Optional[float] = None
    clamp_delta: float = 1e-3

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown schedule family {self.family!r}")
        if self.family == POWER_LAW:
            if self.gamma is None or self.p is None or self.gamma <= 0 or self.p <= 0:
                raise ConfigError(
                    f"power-law schedule needs gamma > 0 and p > 0, got {self.gamma}, {self.p}")
        if self.family == STRONGLY_MONOTONE:
            if self.mu is None or self.mu <= 0:
                raise ConfigError(f"strongly-monotone schedule needs mu > 0, got {self.mu}")
        if not 0 < self.clamp_delta < 1:
            raise ConfigError(f"clamp_delta must lie in (0, 1), got {self.clamp_delta}")


def power_law(gamma: float, p: float, clamp_delta: float = 1e-3) -> AnchorSchedule:
    """gamma / t^p."""
    return AnchorSchedule(family=POWER_LAW, gamma=gamma, p=p, clamp_delta=clamp_delta)


def strongly_monotone(mu: float, clamp_delta: float = 1e-3) -> AnchorSchedule:
    """2 mu / (e^{2 mu t} - 1), the fast schedule for mu-strongly monotone operators."""
    return AnchorSchedule(family=STRONGLY_MONOTONE, mu=mu, clamp_delta=clamp_delta)


def adaptive(clamp_delta: float = 1e-3) -> AnchorSchedule:
    return AnchorSchedule(family=ADAPTIVE, clamp_delta=clamp_delta)


def no_anchor() -> AnchorSchedule:
    return AnchorSchedule(family=NONE)


def beta_at(schedule: AnchorSchedule, t: float) -> float:
    """beta(t) for t > 0.  Adaptive schedules are state-dependent and refuse."""
    if schedule.family == ADAPTIVE:
        raise AdaptiveNeedsState("adaptive beta is computed from the trajectory state")
    if not t > 0:
        raise ConfigError(f"beta is defined for t > 0, got t={t}")
    if schedule.family == NONE:
        return 0.0
    if schedule.family == POWER_LAW:
        return schedule.gamma / t ** schedule.p
    # strongly monotone: 2 mu e^{-z} / (1 - e^{-z}) with z = 2 mu t is the
    # overflow-free form of 2 mu / (e^z - 1)
    z = 2.0 * schedule.mu * t
    return 2.0 * schedule.mu * math.exp(-z) / (-math.expm1(-z))


def beta_clamped(schedule: AnchorSchedule, t: float) -> float:
    """beta(max(t, clamp_delta)): finite for all t >= 0."""
    if schedule.family == NONE:
        return 0.0
    return beta_at(schedule, max(t, schedule.clamp_delta))


def log_contraction(schedule: AnchorSchedule, t: float) -> float:
    """log C(t); the derivative of this in t is beta(t)."""
    if schedule.family in (ADAPTIVE, NONE):
        raise AdaptiveNeedsState(f"no closed-form contraction for family {schedule.family!r}")
    if not t > 0:
        raise ConfigError(f"contraction is defined for t > 0, got t={t}")
    if schedule.family == POWER_LAW:
        if abs(schedule.p - 1.0) < _P_ONE_TOL:
            return schedule.gamma * math.log(t)
        return schedule.gamma / (1.0 - schedule.p) * t ** (1.0 - schedule.p)
    return math.log(-math.expm1(-2.0 * schedule.mu * t))


def contraction_C(schedule: AnchorSchedule, t: float) -> float:
    """C(t) in closed form: t^gamma (p=1), exp(gamma/(1-p) t^{1-p}) (p != 1),
    or 1 - e^{-2 mu t} for the strongly-monotone family."""
    try:
        return math.exp(log_contraction(schedule, t))
    except OverflowError:
        return math.inf


def contraction_at_zero(schedule: AnchorSchedule) -> float:
    """C(0) = lim_{t -> 0+} C(t); 1 for p < 1 power laws, else 0."""
    if schedule.family == POWER_LAW and schedule.p < 1.0 - _P_ONE_TOL:
        return 1.0
    return 0.0


def beta_adaptive_discrete(residual, x, x0, eps: float = ZERO_RESIDUAL_SQ) -> float:
    """Adaptive anchor weight ||r||^2 / (-<r, x - x0> + ||r||^2).

    Returns 0 on an (up to ``eps``, squared-norm) zero residual.  The value
    lies in [0, 1) whenever <r, x - x0> < 0, which holds along trajectories
    of the adaptive solver.
    """
    residual = np.asarray(residual, dtype=float)
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if residual.shape != x.shape or x.shape != x0.shape:
        raise ConfigError(
            f"shape mismatch: residual {residual.shape}, x {x.shape}, x0 {x0.shape}")
    if eps < 0:
        raise ConfigError(f"zero-residual tolerance must be nonnegative, got {eps}")
    resid_sq = float(residual @ residual)
    if resid_sq <= eps:
        return 0.0
    denom = -float(residual @ (x - x0)) + resid_sq
    if denom <= 0.0:
        raise NonpositiveDenominator(
            f"adaptive weight denominator {denom:.3e} <= 0 with residual^2 {resid_sq:.3e}")
    return resid_sq / denom
