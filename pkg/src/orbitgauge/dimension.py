"""Box-counting dimension estimation over dyadic scales.

Counts come either from a boolean indicator field on a uniform grid of [0,1]^p
(p = 1 or 2 here), from a membership callable evaluated on such a grid, or
from an explicit list of subintervals of [0,1] (exact path used for the Cantor
and continued-fraction calibration sets).  The dimension is the least-squares
slope of log N(delta) against log(1/delta), with a 95% confidence interval
from the regression residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

from .errors import PreconditionError


@dataclass(frozen=True)
class DimensionEstimate:
    slope: float
    ci95: tuple[float, float]
    scales_log_inv: list[float]     # log(1/delta)
    counts_log: list[float]         # log N(delta)
    intercept: float
    r_squared: float
    degenerate: bool = False
    horizon: dict | None = None     # finite-truncation metadata

    def ci_excludes(self, value: float) -> bool:
        return value < self.ci95[0] or value > self.ci95[1]

    def to_json_obj(self) -> dict:
        return {
            "slope": self.slope,
            "ci95": list(self.ci95),
            "log_inv_scales": self.scales_log_inv,
            "log_counts": self.counts_log,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "degenerate": self.degenerate,
            "horizon": self.horizon,
        }


def _fit_loglog(log_inv: np.ndarray, log_counts: np.ndarray) -> tuple[float, float, tuple[float, float], float]:
    n = len(log_inv)
    A = np.vstack([log_inv, np.ones(n)]).T
    coef, residuals, _, _ = np.linalg.lstsq(A, log_counts, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    fitted = A @ coef
    ss_res = float(((log_counts - fitted) ** 2).sum())
    ss_tot = float(((log_counts - log_counts.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if n > 2:
        s2 = ss_res / (n - 2)
        sxx = float(((log_inv - log_inv.mean()) ** 2).sum())
        se = math.sqrt(s2 / sxx) if sxx > 0 else 0.0
        tq = float(stats.t.ppf(0.975, n - 2))
        ci = (slope - tq * se, slope + tq * se)
    else:
        ci = (slope, slope)
    return slope, intercept, ci, r2


def box_counts_from_field(field: np.ndarray, k: int) -> int:
    """Number of 2^-k boxes of [0,1]^p containing a true grid node."""
    field = np.asarray(field)
    if field.dtype != bool:
        field = field.astype(bool)
    if field.ndim == 1:
        n = field.shape[0]
        idx = np.nonzero(field)[0]
        boxes = np.unique((idx * (1 << k)) // n)
        return int(boxes.shape[0])
    if field.ndim == 2:
        n0, n1 = field.shape
        i, j = np.nonzero(field)
        b = (i * (1 << k)) // n0 * (1 << k) + (j * (1 << k)) // n1
        return int(np.unique(b).shape[0])
    raise PreconditionError("fields of dimension 1 or 2 only")


def box_counts_from_intervals(intervals: list[tuple[Fraction, Fraction]], k: int) -> int:
    """Exact count of dyadic 2^-k boxes meeting a union of closed intervals.

    Box j is [j 2^-k, (j+1) 2^-k); an interval touching a wall only at its
    right endpoint still counts the box to the right (closed-set convention).
    """
    scale = 1 << k
    total = 0
    prev_end = -1
    for lo, hi in sorted(intervals):
        a = max(int(lo * scale), 0)
        b = min(int(hi * scale), scale - 1)
        if a > prev_end:
            total += b - a + 1
        elif b > prev_end:
            total += b - prev_end
        prev_end = max(prev_end, b)
    return total


def box_count_dimension(
    source,
    scales: list[int],
    horizon: dict | None = None,
) -> DimensionEstimate:
    """Dimension estimate from dyadic box counts at scales delta = 2^-k.

    ``source`` is a boolean field, a membership callable (evaluated on a 2^20
    grid of [0,1]), or a list of (lo, hi) Fractions.  Needs >= 4 scales; an
    empty set is reported as dimension 0 with the degenerate flag.
    """
    ks = sorted(int(k) for k in scales)
    if len(ks) < 4:
        raise PreconditionError("need at least 4 dyadic scales")
    if callable(source):
        grid = (np.arange(1 << 20) + 0.5) / (1 << 20)
        source = np.asarray(source(grid), dtype=bool)
    if isinstance(source, np.ndarray):
        counts = [box_counts_from_field(source, k) for k in ks]
    else:
        counts = [box_counts_from_intervals(source, k) for k in ks]
    if max(counts) == 0:
        return DimensionEstimate(
            slope=0.0, ci95=(0.0, 0.0), scales_log_inv=[k * math.log(2) for k in ks],
            counts_log=[0.0] * len(ks), intercept=0.0, r_squared=1.0,
            degenerate=True, horizon=horizon,
        )
    log_inv = np.array([k * math.log(2.0) for k in ks])
    log_counts = np.array([math.log(c) for c in counts])
    slope, intercept, ci, r2 = _fit_loglog(log_inv, log_counts)
    return DimensionEstimate(
        slope=slope, ci95=ci, scales_log_inv=log_inv.tolist(),
        counts_log=log_counts.tolist(), intercept=intercept, r_squared=r2,
        horizon=horizon,
    )


# ---------------------------------------------------------------------------
# Calibration set generators
# ---------------------------------------------------------------------------

def cantor_intervals(depth: int) -> list[tuple[Fraction, Fraction]]:
    """Middle-thirds construction truncated at the given depth (2^depth pieces)."""
    pieces = [(Fraction(0), Fraction(1))]
    for _ in range(depth):
        nxt = []
        for lo, hi in pieces:
            third = (hi - lo) / 3
            nxt.append((lo, lo + third))
            nxt.append((hi - third, hi))
        pieces = nxt
    return pieces


def cf_bounded_endpoints(bound: int, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Float endpoints of the depth-truncated bounded-quotient cylinders.

    Breadth-first with integer convergent arrays; scales to depth 20 (about a
    million cylinders for bound 2) where the Fraction generator would crawl.
    Float endpoints are adequate for box counting at scales down to ~2^-30.
    """
    p0 = np.array([1], dtype=np.int64)
    q0 = np.array([0], dtype=np.int64)
    p1 = np.array([0], dtype=np.int64)
    q1 = np.array([1], dtype=np.int64)
    for _ in range(depth):
        ps, qs, prev_ps, prev_qs = [], [], [], []
        for a in range(1, bound + 1):
            ps.append(a * p1 + p0)
            qs.append(a * q1 + q0)
            prev_ps.append(p1)
            prev_qs.append(q1)
        p0 = np.concatenate(prev_ps)
        q0 = np.concatenate(prev_qs)
        p1 = np.concatenate(ps)
        q1 = np.concatenate(qs)
    a_end = p1 / q1
    b_end = (p1 + p0) / (q1 + q0)
    lo = np.minimum(a_end, b_end)
    hi = np.maximum(a_end, b_end)
    return lo, hi


def box_counts_from_float_endpoints(lo: np.ndarray, hi: np.ndarray, k: int) -> int:
    """Vectorized dyadic box count for a family of closed float intervals."""
    scale = float(1 << k)
    order = np.argsort(lo)
    a = np.floor(lo[order] * scale).astype(np.int64)
    b = np.minimum(np.floor(hi[order] * scale), scale - 1).astype(np.int64)
    a = np.maximum(a, 0)
    prev = np.concatenate([[-1], np.maximum.accumulate(b)[:-1]])
    start = np.maximum(a, prev + 1)
    return int(np.maximum(0, b - start + 1).sum())


def cf_bounded_intervals(bound: int, depth: int) -> list[tuple[Fraction, Fraction]]:
    """Cylinder intervals of continued fractions with partial quotients <= bound,
    truncated at the given depth.

    The cylinder of (a_1..a_k) is the interval between p_k/q_k and
    (p_k + p_{k-1})/(q_k + q_{k-1}); endpoints are exact rationals.
    """
    out: list[tuple[Fraction, Fraction]] = []

    def rec(k, p0, q0, p1, q1):
        # current convergent p1/q1 with previous p0/q0
        if k == depth:
            a = Fraction(p1, q1)
            b = Fraction(p1 + p0, q1 + q0)
            out.append((min(a, b), max(a, b)))
            return
        for a in range(1, bound + 1):
            rec(k + 1, p1, q1, a * p1 + p0, a * q1 + q0)

    rec(0, 1, 0, 0, 1)
    return out
