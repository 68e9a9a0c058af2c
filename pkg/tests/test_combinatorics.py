from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitgauge.combinatorics import (
    _d_of_mask,
    _dprime_of_mask,
    d_counts,
    exhaustive_dprime_check,
    subset_sum_bound,
)
from orbitgauge.errors import BudgetError


class TestDCounts:
    def test_empty(self):
        assert d_counts(set(), 5) == (0, 0)

    def test_full(self):
        assert d_counts({1, 2, 3, 4, 5}, 5) == (0, 0)

    def test_spec_example(self):
        assert d_counts({2, 3}, 4) == (1, 1)

    def test_bitmask_agrees_with_direct(self, rng):
        for _ in range(500):
            N = int(rng.integers(1, 13))
            mask = int(rng.integers(0, 1 << N))
            J = {i + 1 for i in range(N) if mask >> i & 1}
            d, dp = d_counts(J, N)
            assert d == _d_of_mask(mask, N)
            assert dp == _dprime_of_mask(mask, N)

    def test_exhaustive_dprime_N16(self):
        assert exhaustive_dprime_check(16)


class TestSubsetSum:
    def test_N1(self):
        lhs, rhs, ok = subset_sum_bound(2.0, 3.0, 5.0, 1)
        assert lhs == Fraction(5) and rhs == Fraction(10) and ok

    def test_N2_units(self):
        lhs, rhs, ok = subset_sum_bound(1, 1, 1, 2)
        assert lhs == 4 and rhs == 9 and ok

    def test_random_N12(self, rng):
        for _ in range(100):
            n1, n2, n3 = np.exp(rng.uniform(-3, 3, size=3))
            _, _, ok = subset_sum_bound(float(n1), float(n2), float(n3), 12)
            assert ok

    def test_budget_guard(self):
        with pytest.raises(BudgetError):
            subset_sum_bound(1, 1, 1, 21)

    def test_positive_required(self):
        with pytest.raises(ValueError):
            subset_sum_bound(0.0, 1.0, 1.0, 3)

    @given(
        st.floats(0.01, 100.0), st.floats(0.01, 100.0), st.floats(0.01, 100.0),
        st.integers(1, 10),
    )
    @settings(max_examples=60, deadline=None)
    def test_bound_holds(self, n1, n2, n3, N):
        _, _, ok = subset_sum_bound(n1, n2, n3, N)
        assert ok
