import math

import numpy as np
import pytest

from orbitgauge.errors import PreconditionError
from orbitgauge.flows import FlowSpec, apply_flow, horospherical_frame
from orbitgauge.lattice import LatticeBasis, systole
from orbitgauge.tessellation import (
    TessellationSpec,
    bigt_threshold,
    bowen_box,
    count_intersecting_translates,
    cover_bowen_by_balls,
    cover_V_theta_by_V_r,
    covering_constant_c0,
    tiling_check,
)


class TestFrames:
    def test_unweighted_1_1(self):
        f = horospherical_frame(FlowSpec.standard(1, 1), 1, 1)
        assert (f.p, f.lambda_min, f.lambda_max, f.delta) == (1, 2.0, 2.0, 2.0)

    def test_unweighted_1_2(self):
        f = horospherical_frame(FlowSpec.standard(1, 2), 1, 2)
        assert (f.p, f.lambda_min, f.lambda_max, f.delta) == (2, 3.0, 3.0, 6.0)
        # p*lambda_max - delta = 0 for unweighted flows
        assert f.p * f.lambda_max - f.delta == 0.0

    def test_weighted(self):
        f = horospherical_frame(FlowSpec.weighted([2 / 3, 1 / 3], [1.0]), 2, 1)
        assert f.p == 2
        assert f.lambda_min == pytest.approx(4 / 3)
        assert f.lambda_max == pytest.approx(5 / 3)
        assert f.delta == pytest.approx(3.0)

    def test_block_sorting_required(self):
        with pytest.raises(PreconditionError):
            horospherical_frame(FlowSpec((-1.0, 1.0)), 1, 1)

    def test_zero_sum_required(self):
        with pytest.raises(PreconditionError):
            FlowSpec((1.0, -0.5))


class TestApplyFlow:
    def test_t_zero_identity(self, flow11):
        b = LatticeBasis.standard(2)
        assert np.allclose(apply_flow(flow11, 0.0, b).cols, b.cols)

    def test_axis_contraction(self, flow11):
        b = apply_flow(flow11, 1.0, LatticeBasis.standard(2))
        assert systole(b) == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_group_law(self, flow11):
        b0 = LatticeBasis(np.array([[1.0, 0.4], [0.1, 1.04]])
                          / math.sqrt(abs(np.linalg.det(np.array([[1.0, 0.4], [0.1, 1.04]])))))
        b = apply_flow(flow11, 1.0, apply_flow(flow11, -1.0, b0))
        assert np.allclose(b.cols, b0.cols, atol=1e-12)


class TestTranslateCounting:
    def test_spec_count_near_t1(self, frame11):
        # admissible t just above log(8)/2; same count as the t = 1 instance
        tess = TessellationSpec(p=1, r=0.1)
        rep = count_intersecting_translates(frame11, tess, 1.05)
        assert rep.exact_count == 9
        assert rep.passed

    def test_precondition_below_bigt(self, frame11):
        tess = TessellationSpec(p=1, r=0.1)
        with pytest.raises(PreconditionError):
            count_intersecting_translates(frame11, tess, 1.0)

    def test_tiling_density_limit(self, frame11):
        # count / e^(delta t) -> 1
        tess = TessellationSpec(p=1, r=0.1)
        ratios = []
        for t in (4.0, 6.0, 8.0):
            rep = count_intersecting_translates(frame11, tess, t)
            ratios.append(rep.exact_count / math.exp(frame11.delta * t))
        assert abs(ratios[-1] - 1.0) < 5e-4
        assert abs(ratios[-1] - 1.0) <= abs(ratios[0] - 1.0)

    def test_c0_value(self):
        assert covering_constant_c0(1) == 16.0

    def test_monotone_in_t(self, frame11):
        tess = TessellationSpec(p=1, r=0.08)
        counts = [
            count_intersecting_translates(frame11, tess, t).exact_count
            for t in np.linspace(1.1, 4.0, 25)
        ]
        assert all(a <= b for a, b in zip(counts, counts[1:]))

    def test_randomized_admissible_configurations(self, rng):
        shapes = [(1, 1), (1, 2), (2, 1), (2, 2)]
        for _ in range(100):
            m, n = shapes[rng.integers(0, len(shapes))]
            if rng.uniform() < 0.3:
                pos = sorted(rng.uniform(0.3, 1.5, size=m), reverse=True)
                neg = list(rng.uniform(0.3, 1.5, size=n))
                total_p, total_n = sum(pos), sum(neg)
                neg = [v * total_p / total_n for v in neg]
                flow = FlowSpec.weighted(pos, neg)
            else:
                flow = FlowSpec.standard(m, n)
            frame = horospherical_frame(flow, m, n)
            tess = TessellationSpec(p=frame.p, r=float(rng.uniform(0.01, 0.1)))
            t = bigt_threshold(frame) + float(rng.uniform(0.0, 2.0))
            rep = count_intersecting_translates(frame, tess, t)
            assert rep.passed, (m, n, flow.exponents, tess.r, t)


class TestThetaCover:
    def test_aligned_theta_equals_r(self):
        tess = TessellationSpec(p=1, r=0.1)
        rep = cover_V_theta_by_V_r(tess, 0.1)
        assert rep.exact_count == 1
        assert rep.bound == pytest.approx(9.0)
        assert rep.passed

    def test_theta_ten_r(self):
        tess = TessellationSpec(p=1, r=0.01)
        rep = cover_V_theta_by_V_r(tess, 0.1)
        assert 10 <= rep.exact_count <= 12
        assert rep.bound == pytest.approx(18.0)
        assert rep.passed

    def test_theta_below_r_rejected(self):
        tess = TessellationSpec(p=1, r=0.1)
        with pytest.raises(PreconditionError):
            cover_V_theta_by_V_r(tess, 0.05)

    def test_randomized(self, rng):
        for _ in range(100):
            p = int(rng.integers(1, 4))
            r = float(rng.uniform(0.005, 0.05))
            theta = float(rng.uniform(r, 0.1))
            rep = cover_V_theta_by_V_r(TessellationSpec(p=p, r=r), theta)
            assert rep.passed


class TestBowenBoxes:
    def test_volume_law(self, frame11, rng):
        # nu(g_-t A g_t) = e^(-delta t) nu(A): exponents sum exactly, volumes to 1e-12
        for m, n in [(1, 1), (1, 2), (2, 2)]:
            frame = horospherical_frame(FlowSpec.standard(m, n), m, n)
            assert frame.entry_exponents.sum() == pytest.approx(frame.delta, abs=0)
            tess = TessellationSpec(p=frame.p, r=0.1)
            for t in (0.5, 2.0, 5.0):
                box = bowen_box(frame, tess, t, np.zeros(frame.p))
                assert box.volume() == pytest.approx(
                    math.exp(-frame.delta * t) * tess.volume(), rel=1e-12
                )

    def test_diameter_bounds(self, frame11):
        tess = TessellationSpec(p=1, r=0.1)
        box = bowen_box(frame11, tess, 2.0, np.array([0.025]))
        assert box.diameter_exact() <= box.diameter_bound()

    def test_unweighted_single_ball(self):
        for m, n in [(1, 1), (1, 2)]:
            frame = horospherical_frame(FlowSpec.standard(m, n), m, n)
            cover = cover_bowen_by_balls(frame, 3.0, 0.1)
            assert cover.centers.shape[0] == 1
            assert cover.passed

    def test_weighted_ball_count(self):
        frame = horospherical_frame(FlowSpec.weighted([2 / 3, 1 / 3], [1.0]), 2, 1)
        cover = cover_bowen_by_balls(frame, 3.0, 0.1)
        assert cover.bound == pytest.approx(math.e)
        assert cover.centers.shape[0] <= 3

    def test_ball_count_within_bound_randomized(self, rng):
        for _ in range(25):
            pos = sorted(rng.uniform(0.3, 1.2, size=2), reverse=True)
            neg = [sum(pos)]
            frame = horospherical_frame(FlowSpec.weighted(pos, neg), 2, 1)
            t = float(rng.uniform(0.5, 4.0))
            cover = cover_bowen_by_balls(frame, t, 0.1)
            assert cover.centers.shape[0] <= math.ceil(cover.bound)


class TestBallSandwich:
    def test_cube_between_balls(self):
        # B(r/(16 sqrt p)) inside the cube of side r/(4 sqrt p) inside B(r/4):
        # inradius r/(8 sqrt p) >= r/(16 sqrt p), circumradius r/8 <= r/4
        for p in (1, 2, 4):
            tess = TessellationSpec(p=p, r=0.12)
            inradius = tess.side / 2.0
            circumradius = tess.side * math.sqrt(p) / 2.0
            assert inradius >= 0.12 / (16.0 * math.sqrt(p))
            assert circumradius <= 0.12 / 4.0


class TestTiling:
    def test_windows(self):
        for p in (1, 2):
            res = tiling_check(TessellationSpec(p=p, r=0.13))
            assert res["max_defect"] <= 1e-12
            assert res["interiors_disjoint"]

    def test_r_star_domain(self):
        with pytest.raises(PreconditionError):
            TessellationSpec(p=1, r=0.3)
        with pytest.raises(PreconditionError):
            TessellationSpec(p=1, r=0.1, r_star=0.3)
