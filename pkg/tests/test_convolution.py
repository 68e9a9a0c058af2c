import math
from fractions import Fraction

import pytest

from orbitgauge.convolution import (
    PiecewisePolyDensity,
    contraction_onset,
    convolution_density_check,
    convolution_density_check_frame,
)
from orbitgauge.errors import PreconditionError
from orbitgauge.flows import FlowSpec, horospherical_frame


class TestDensity:
    def test_uniform_mass(self):
        dens = PiecewisePolyDensity.uniform(Fraction(1))
        assert dens.cumulative_at_breaks()[-1] == 1

    def test_convolution_preserves_mass(self):
        dens = PiecewisePolyDensity.uniform(Fraction(1))
        dens = dens.convolve_uniform(Fraction(1, 3))
        assert dens.cumulative_at_breaks()[-1] == 1
        dens = dens.convolve_uniform(Fraction(1, 7))
        assert dens.cumulative_at_breaks()[-1] == 1

    def test_triangle_density(self):
        # sum of two unit uniforms: density (2 - |x|)/4, min over the half ball
        # is 3/8 at the endpoints (non-constant piece, numeric path)
        dens = PiecewisePolyDensity.uniform(Fraction(1)).convolve_uniform(Fraction(1))
        lo, exact = dens.min_on_interval(Fraction(-1, 2), Fraction(1, 2))
        assert not exact
        assert float(lo) == pytest.approx(0.375, abs=1e-9)


class TestCheck:
    def test_onset(self):
        assert contraction_onset(2.0) == pytest.approx(math.log(4.0) / 2.0)

    def test_n1_trivial(self):
        chk = convolution_density_check(2.0, 1.0, 1)
        assert chk.exactly_one and chk.min_ratio == 1.0

    def test_exactly_one_family(self):
        for n in range(2, 11):
            chk = convolution_density_check(2.0, 1.0, n)
            assert chk.exactly_one, n
            assert chk.passed

    def test_tail_below_half_always_one(self):
        # within the admissible domain the geometric tail is <= 1/3 < 1/2
        for lam, t, n in [(1.0, 1.5, 6), (2.0, 0.75, 8), (0.5, 3.0, 4)]:
            chk = convolution_density_check(lam, t, n)
            assert chk.tail <= 0.5
            assert chk.exactly_one

    def test_precondition(self):
        with pytest.raises(PreconditionError):
            convolution_density_check(2.0, 0.3, 3)

    def test_frame_product(self):
        frame = horospherical_frame(FlowSpec.standard(1, 2), 1, 2)
        checks = convolution_density_check_frame(frame.entry_exponents, 1.0, 3)
        assert len(checks) == 2
        assert all(c.exactly_one for c in checks)
