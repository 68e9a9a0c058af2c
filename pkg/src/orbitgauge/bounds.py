"""Codimension-bound calculators for avoidance sets.

These evaluate the closed-form constant chains with measured inputs.  Raw
values may be negative when hypotheses fail; every result therefore carries
the raw number, a clamped-at-zero companion, and a flag, so a hypothesis
violation is visible instead of silently clipped.  All distance-dependent
inputs are metric-relative; outputs carry a surrogate_metric marker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import PreconditionError
from .targets import TargetSet, inner_core


@dataclass(frozen=True)
class BoundValue:
    raw: float
    clamped: float
    clamped_at_zero: bool
    surrogate_metric: bool = True

    def to_json_obj(self) -> dict:
        return {
            "raw": self.raw,
            "clamped": self.clamped,
            "clamped_at_zero": self.clamped_at_zero,
            "surrogate_metric": self.surrogate_metric,
        }


def _wrap(raw: float) -> BoundValue:
    return BoundValue(raw=raw, clamped=max(raw, 0.0), clamped_at_zero=raw < 0.0)


def codim_bound_S1(lambda_max: float, k: int, t: float, c) -> BoundValue:
    """log((1-c)/(4c)) / (lambda_max k t): codimension of never-returning leaves.

    Zero at c = 1/5 and strictly decreasing in c.  ``c`` may be a Fraction (or
    "num/den" string) for an exact ratio before the final log.
    """
    if k < 2:
        raise PreconditionError("need k >= 2")
    if t <= 0:
        raise PreconditionError("need t > 0")
    cf = Fraction(c) if not isinstance(c, Fraction) else c
    if not (0 < cf < 1):
        raise PreconditionError("need 0 < c < 1")
    ratio = (1 - cf) / (4 * cf)
    raw = math.log(ratio) / (lambda_max * k * t)
    return _wrap(raw)


def codim_bound_S2(
    mu_sigma4theta_O: float,
    C1: float,
    theta: float,
    p: int,
    c: float,
    C2: float,
    r: float,
    lam: float,
    k: int,
    t: float,
    lambda_max: float,
) -> BoundValue:
    """[mu(sigma_{4 theta} O) - (8 C1/theta^p) sqrt(c)/(1-c) - (C2/r^p) e^(-lam k t)]
    over (lambda_max k t)."""
    if not (0 < c < 1):
        raise PreconditionError("need 0 < c < 1")
    if not (r <= theta):
        raise PreconditionError("need theta >= r")
    numerator = (
        mu_sigma4theta_O
        - (8.0 * C1 / theta ** p) * (math.sqrt(c) / (1.0 - c))
        - (C2 / r ** p) * math.exp(-lam * k * t)
    )
    raw = numerator / (lambda_max * k * t)
    return _wrap(raw)


def final_codim(mu_O: float, lambda_max: float, k: int, t: float) -> BoundValue:
    """mu(O) / (4 lambda_max k t), the assembled final codimension constant."""
    if mu_O <= 0:
        raise PreconditionError("mu(O) must be positive: theorem hypothesis fails")
    return _wrap(mu_O / (4.0 * lambda_max * k * t))


def c_of_target(mu_O: float, C1: float, theta: float, p: int) -> float:
    """min(1/(4 sqrt(e) + 1), (mu(O) theta^p / (128 C1))^2)."""
    return min(1.0 / (4.0 * math.sqrt(math.e) + 1.0),
               (mu_O / (128.0 * C1) * theta ** p) ** 2)


@dataclass(frozen=True)
class ThetaScan:
    theta: float
    mu_O: float
    mu_O_se: float
    trace: list = field(default_factory=list)
    boundary_uncertain: bool = False


def theta_of_target(
    target: TargetSet,
    n_samples: int,
    rng: np.random.Generator,
    tol: float = 1e-3,
    kappa: float = 1.0,
) -> ThetaScan:
    """sup{theta <= 1 : mu(sigma_{4 theta} O) >= mu(O)/2} by bisection on
    Monte-Carlo estimates.

    The same Haar sample set is reused across the bisection (common random
    numbers), so the core-measure trace is exactly non-increasing in theta.
    A 3-sigma flag marks bisections that ended inside the noise band.
    """
    from .lattice import sample_haar_tau

    if target.kind == "whole":
        return ThetaScan(theta=1.0, mu_O=1.0, mu_O_se=0.0)
    xs, ys = sample_haar_tau(rng, n_samples)

    def mu_core(theta: float) -> float:
        core = inner_core(target, 4.0 * theta, kappa=kappa)
        from .targets import _membership_tau

        return float(_membership_tau(core, xs, ys).mean())

    mu0 = mu_core(0.0)
    se = math.sqrt(max(mu0 * (1 - mu0), 1.0 / n_samples) / n_samples)
    if mu0 <= 0.0:
        raise PreconditionError("mu(O) estimated zero: no bound available")
    lo, hi = 0.0, 1.0
    trace = []
    if mu_core(1.0) >= mu0 / 2.0:
        return ThetaScan(theta=1.0, mu_O=mu0, mu_O_se=se, trace=[(1.0, mu_core(1.0))])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        val = mu_core(mid)
        trace.append((mid, val))
        if val >= mu0 / 2.0:
            lo = mid
        else:
            hi = mid
    boundary_uncertain = abs(trace[-1][1] - mu0 / 2.0) < 3.0 * se if trace else False
    return ThetaScan(theta=lo, mu_O=mu0, mu_O_se=se, trace=trace,
                     boundary_uncertain=boundary_uncertain)
