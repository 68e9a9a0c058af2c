import math

import numpy as np
import pytest

from orbitgauge.equidist import (
    equidistribution_error,
    fit_decay,
    fit_exponential_decay,
    measure_lower_bound_check,
    mixing_onset,
    r0_proxy,
    window_fraction,
)
from orbitgauge.errors import PreconditionError
from orbitgauge.lattice import LatticeBasis, basis_from_tau
from orbitgauge.targets import TargetSet


class TestDiscrepancy:
    def test_whole_space_zero(self, flow11, frame11, rng):
        res = equidistribution_error(
            LatticeBasis.standard(2), flow11, frame11, 3.0, TargetSet.whole(),
            0.1, 10_000, rng,
        )
        assert res.error == 0.0

    def test_cusp_point_unbalanced_at_t0(self, flow11, frame11, rng):
        # deep cusp point: the unpushed orbit piece misses a moderate target
        x = basis_from_tau(complex(0.0, 100.0))
        res = equidistribution_error(
            x, flow11, frame11, 0.0, TargetSet.systole_above(0.9), 0.1, 50_000, rng,
        )
        assert res.window_fraction == 0.0
        assert res.mu_estimate > 0.2
        assert res.error > 0.2

    def test_equidistributed_at_large_t(self, flow11, frame11, rng):
        x = LatticeBasis.standard(2)
        res = equidistribution_error(
            x, flow11, frame11, 8.0, TargetSet.systole_below(0.1), 0.1,
            1_000_000, rng,
        )
        assert res.error <= 3 * res.sigma + 5e-4

    def test_se_scaling(self, flow11, frame11, rng):
        x = LatticeBasis.standard(2)
        tgt = TargetSet.systole_below(0.3)
        _, se1 = window_fraction(x, frame11, 6.0, tgt, 0.1, 50_000,
                                 np.random.default_rng(3))
        _, se2 = window_fraction(x, frame11, 6.0, tgt, 0.1, 100_000,
                                 np.random.default_rng(3))
        assert se2 / se1 == pytest.approx(1.0 / math.sqrt(2.0), rel=0.1)

    def test_r0_proxy(self):
        assert r0_proxy(LatticeBasis.standard(2)) == 1.0
        assert r0_proxy(basis_from_tau(100j)) == pytest.approx(0.1)
        assert mixing_onset(LatticeBasis.standard(2)) == pytest.approx(2.0)


class TestDecayFit:
    def test_synthetic_exponential(self):
        ts = [3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
        errs = [0.5 * math.exp(-0.7 * t) for t in ts]
        fit = fit_exponential_decay(ts, errs, [0.0] * 6)
        assert fit.lambda_hat == pytest.approx(0.7, abs=1e-6)
        assert fit.intercept == pytest.approx(0.5, abs=1e-6)
        assert fit.positive_at_95

    def test_recovers_rate_family(self):
        # 3 significant digits across lambda in {0.1, 0.5, 1.0}
        ts = [float(t) for t in range(2, 12)]
        for lam in (0.1, 0.5, 1.0):
            errs = [0.8 * math.exp(-lam * t) for t in ts]
            fit = fit_exponential_decay(ts, errs, [0.0] * len(ts))
            assert fit.lambda_hat == pytest.approx(lam, rel=1e-3)

    def test_all_censored_inconclusive(self):
        ts = [3.0, 4.0, 5.0, 6.0]
        fit = fit_exponential_decay(ts, [1e-6] * 4, [1e-3] * 4)
        assert not fit.conclusive
        assert fit.lambda_hat is None

    def test_short_grid_refused(self):
        with pytest.raises(PreconditionError):
            fit_exponential_decay([1.0, 2.0, 3.0], [0.1, 0.05, 0.02], [0.0] * 3)

    def test_whole_space_inconclusive(self, flow11, frame11, rng):
        fit = fit_decay(
            LatticeBasis.standard(2), flow11, frame11, TargetSet.whole(), 0.1,
            [3.0, 4.0, 5.0, 6.0], 5_000, rng,
        )
        assert not fit.conclusive

    def test_onset_enforced(self, flow11, frame11, rng):
        x = basis_from_tau(complex(0.0, 100.0))  # onset = 2 + log(10) > 4
        with pytest.raises(PreconditionError):
            fit_decay(x, flow11, frame11, TargetSet.systole_below(0.3), 0.1,
                      [3.0, 4.0, 5.0, 6.0], 1_000, rng)

    def test_real_decay_positive(self, flow11, frame11, rng):
        fit = fit_decay(
            LatticeBasis.standard(2), flow11, frame11,
            TargetSet.systole_below(0.3), 0.1,
            [3.0, 3.5, 4.0, 4.5, 5.0, 5.5], 200_000, rng,
        )
        assert fit.conclusive
        assert fit.positive_at_95
        assert fit.lambda_source == "fitted"


class TestMeasureLowerBound:
    def test_whole_space_passes(self, flow11, frame11, rng):
        res = measure_lower_bound_check(
            LatticeBasis.standard(2), flow11, frame11, 6.0, TargetSet.whole(),
            0.1, 1.0, 20_000, rng,
        )
        assert res.passed
        assert res.lhs == pytest.approx(res.nu_window)

    def test_small_t_vacuous(self, flow11, frame11, rng):
        res = measure_lower_bound_check(
            LatticeBasis.standard(2), flow11, frame11, 3.0,
            TargetSet.systole_above(0.5), 0.1, 0.3, 20_000, rng,
        )
        assert res.vacuous
        assert res.passed

    def test_nonvacuous_pass_at_t8(self, flow11, frame11, rng):
        res = measure_lower_bound_check(
            LatticeBasis.standard(2), flow11, frame11, 8.0,
            TargetSet.systole_above(0.5), 0.1, 1.2, 500_000, rng,
        )
        assert not res.vacuous
        assert res.passed

    def test_lambda_prime_positive(self, flow11, frame11, rng):
        with pytest.raises(PreconditionError):
            measure_lower_bound_check(
                LatticeBasis.standard(2), flow11, frame11, 6.0,
                TargetSet.whole(), 0.1, 0.0, 1_000, rng,
            )
