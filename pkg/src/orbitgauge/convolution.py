"""Exact density of flow-conjugated convolution measures on the expanding block.

For an abelian block the n-fold composition h_n -> g-conjugates collapses to
the sum s_1 + e^(-lam t) s_2 + ... + e^(-lam (n-1) t) s_n of independent
uniforms on [-1, 1].  Its density is piecewise polynomial; we compute it in
exact rational arithmetic (each float scale is the dyadic rational it is) and
compare with the reference uniform density 1/2 on the half ball [-1/2, 1/2].

Whenever the geometric tail sum of the scales is <= 1/2, the density equals
1/2 identically on the half ball, so the ratio is exactly one with zero
tolerance; that is the checked statement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import PreconditionError

Poly = list[Fraction]  # coefficient list, constant term first


def _poly_eval(c: Poly, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for coef in reversed(c):
        acc = acc * x + coef
    return acc


def _poly_antiderivative(c: Poly) -> Poly:
    return [Fraction(0)] + [coef / (k + 1) for k, coef in enumerate(c)]


def _poly_shift(c: Poly, a: Fraction) -> Poly:
    """Coefficients of P(x + a)."""
    out = [Fraction(0)] * len(c)
    for k, coef in enumerate(c):
        # expand coef * (x + a)^k
        binom = 1
        power = Fraction(1)
        for j in range(k, -1, -1):
            out[j] += coef * binom * power
            binom = binom * j // (k - j + 1)
            power *= a
    return out


def _poly_axpy(c1: Poly, c2: Poly, sign: int = 1) -> Poly:
    n = max(len(c1), len(c2))
    out = [Fraction(0)] * n
    for k in range(n):
        if k < len(c1):
            out[k] += c1[k]
        if k < len(c2):
            out[k] += sign * c2[k]
    return out


@dataclass
class PiecewisePolyDensity:
    """Probability density supported on [breaks[0], breaks[-1]], polynomial on
    each open piece (breaks[i], breaks[i+1])."""

    breaks: list[Fraction]
    pieces: list[Poly]

    @staticmethod
    def uniform(halfwidth: Fraction) -> "PiecewisePolyDensity":
        h = Fraction(halfwidth)
        return PiecewisePolyDensity([-h, h], [[Fraction(1, 2) / h]])

    def cumulative_at_breaks(self) -> list[Fraction]:
        cum = [Fraction(0)]
        for i, poly in enumerate(self.pieces):
            anti = _poly_antiderivative(poly)
            inc = _poly_eval(anti, self.breaks[i + 1]) - _poly_eval(anti, self.breaks[i])
            cum.append(cum[-1] + inc)
        return cum

    def _cdf_poly(self, y_mid: Fraction, cum: list[Fraction]) -> tuple[Poly, bool]:
        """CDF around abscissa y_mid as a local polynomial in y (or a constant
        outside the support); second return marks the constant case."""
        if y_mid <= self.breaks[0]:
            return [Fraction(0)], True
        if y_mid >= self.breaks[-1]:
            return [cum[-1]], True
        j = 0
        while not (self.breaks[j] < y_mid <= self.breaks[j + 1]):
            j += 1
        anti = _poly_antiderivative(self.pieces[j])
        const = cum[j] - _poly_eval(anti, self.breaks[j])
        out = list(anti)
        out[0] += const
        return out, False

    def convolve_uniform(self, halfwidth: Fraction) -> "PiecewisePolyDensity":
        """Density of X + U with U uniform on [-a, a]: (F(x+a) - F(x-a))/(2a)."""
        a = Fraction(halfwidth)
        if a <= 0:
            raise PreconditionError("halfwidth must be positive")
        cum = self.cumulative_at_breaks()
        pts = sorted({b + a for b in self.breaks} | {b - a for b in self.breaks})
        new_pieces: list[Poly] = []
        inv = Fraction(1, 2) / a
        for i in range(len(pts) - 1):
            mid = (pts[i] + pts[i + 1]) / 2
            up, up_const = self._cdf_poly(mid + a, cum)
            lo, lo_const = self._cdf_poly(mid - a, cum)
            up_x = up if up_const else _poly_shift(up, a)
            lo_x = lo if lo_const else _poly_shift(lo, -a)
            diff = _poly_axpy(up_x, lo_x, sign=-1)
            new_pieces.append([inv * c for c in diff])
        return PiecewisePolyDensity(list(pts), new_pieces)

    def restrict(self, lo: Fraction, hi: Fraction) -> "PiecewisePolyDensity":
        """Clip the representation to a window.

        Only valid when every later evaluation stays inside the window (the
        convolution driver guarantees this by shrinking the window by the
        remaining scale budget); cumulative masses outside are discarded.
        """
        lo = max(lo, self.breaks[0])
        hi = min(hi, self.breaks[-1])
        if lo >= hi:
            return PiecewisePolyDensity([lo, lo], [[Fraction(0)]])
        breaks = [lo] + [b for b in self.breaks if lo < b < hi] + [hi]
        pieces = []
        for i in range(len(breaks) - 1):
            mid = (breaks[i] + breaks[i + 1]) / 2
            j = 0
            while not (self.breaks[j] < mid <= self.breaks[j + 1]):
                j += 1
            pieces.append(self.pieces[j])
        return PiecewisePolyDensity(breaks, pieces)

    def min_on_interval(self, lo: Fraction, hi: Fraction) -> tuple[Fraction | None, bool]:
        """Minimum over [lo, hi] when every overlapping piece is constant there
        (exact), else a dense numeric lower envelope (flagged inexact)."""
        exact = True
        best: Fraction | None = None
        numeric_best = math.inf
        for i, poly in enumerate(self.pieces):
            a, b = self.breaks[i], self.breaks[i + 1]
            lo_i, hi_i = max(a, lo), min(b, hi)
            if lo_i >= hi_i:
                continue
            trimmed = poly
            while trimmed and trimmed[-1] == 0:
                trimmed = trimmed[:-1]
            if len(trimmed) <= 1:
                val = trimmed[0] if trimmed else Fraction(0)
                best = val if best is None else min(best, val)
            else:
                exact = False
                for k in range(129):
                    x = lo_i + (hi_i - lo_i) * Fraction(k, 128)
                    numeric_best = min(numeric_best, float(_poly_eval(poly, x)))
        if lo < self.breaks[0] or hi > self.breaks[-1]:
            return Fraction(0), True
        if exact:
            return best, True
        floor = float(best) if best is not None else math.inf
        return Fraction(min(floor, numeric_best)).limit_denominator(10**12), False


@dataclass(frozen=True)
class DensityCheck:
    min_ratio: float
    exact: bool
    exactly_one: bool
    passed: bool
    n: int
    t: float
    lam: float
    tail: float


def contraction_onset(lam: float) -> float:
    """Smallest t with entrywise contraction e^(-lam t) <= 1/4."""
    return math.log(4.0) / lam


def convolution_density_check(lam: float, t: float, n: int) -> DensityCheck:
    """Exact minimum of the convolution-density ratio on the half ball.

    Builds the density of sum_i e^(-lam (i-1) t) s_i exactly and compares with
    the uniform reference 1/2 on [-1/2, 1/2].  Requires the contraction onset
    t >= log(4)/lam; below it the composition is not a contraction stack and
    the call is refused.
    """
    if n < 1:
        raise PreconditionError("need n >= 1")
    t1 = contraction_onset(lam)
    if t < t1 - 1e-12:
        raise PreconditionError(f"t = {t} below contraction onset t1 = {t1:.6f}")
    dens = PiecewisePolyDensity.uniform(Fraction(1))
    scales = [Fraction(math.exp(-lam * i * t)) for i in range(1, n)]
    tail = sum(scales, Fraction(0))
    half = Fraction(1, 2)
    remaining = tail
    for scale in scales:
        dens = dens.convolve_uniform(scale)
        remaining -= scale
        window = half + remaining
        dens = dens.restrict(-window, window)
    mn, exact = dens.min_on_interval(-half, half)
    ratio = (mn if mn is not None else Fraction(0)) / half
    exactly_one = exact and ratio == 1
    return DensityCheck(
        min_ratio=float(ratio),
        exact=exact,
        exactly_one=exactly_one,
        passed=ratio >= 1,
        n=n,
        t=t,
        lam=lam,
        tail=float(tail),
    )


def convolution_density_check_frame(entry_exponents, t: float, n: int) -> list[DensityCheck]:
    """Product structure for p > 1: one independent 1-d check per block entry."""
    import numpy as np

    lams = np.asarray(entry_exponents, dtype=float).reshape(-1)
    return [convolution_density_check(float(l), t, n) for l in lams]
