"""Partition bookkeeping and the exact subset-sum bound.

Everything here is exact: subsets are bitmasks, alternation counts come from
bit arithmetic, and the inequality check runs in rational arithmetic (floats
are converted to the exact dyadic rationals they are), so "passes" means
passes with zero tolerance.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from .errors import BudgetError

SUBSET_SUM_MAX_N = 20


def d_counts(J: set[int] | frozenset[int], N: int) -> tuple[int, int]:
    """Alternation counts of a subset J of {1..N} against its complement I.

    d  = #{i < N : i in J and i+1 in I}
    d' = #{i < N : i in I and i+1 in J}

    Always d' <= d + 1 (each I->J switch after the first J->I block pairs with
    a preceding J->I switch); asserted here because downstream bounds rely on it.
    """
    if any((i < 1 or i > N) for i in J):
        raise ValueError("J must be a subset of {1..N}")
    d = sum(1 for i in range(1, N) if i in J and (i + 1) not in J)
    dp = sum(1 for i in range(1, N) if i not in J and (i + 1) in J)
    assert dp <= d + 1, (J, N, d, dp)
    return d, dp


def _d_of_mask(mask: int, N: int) -> int:
    lowbits = (1 << (N - 1)) - 1
    return ((mask & ~(mask >> 1)) & lowbits).bit_count()


def _dprime_of_mask(mask: int, N: int) -> int:
    lowbits = (1 << (N - 1)) - 1
    return ((~mask & (mask >> 1)) & lowbits).bit_count()


@lru_cache(maxsize=32)
def _jd_count_table(N: int) -> dict[tuple[int, int], int]:
    """Number of subsets of {1..N} with given (|J|, d); one pass over 2^N masks."""
    table: dict[tuple[int, int], int] = {}
    for mask in range(1 << N):
        key = (mask.bit_count(), _d_of_mask(mask, N))
        table[key] = table.get(key, 0) + 1
    return table


def exhaustive_dprime_check(N: int) -> bool:
    """d' <= d + 1 over every subset of {1..N}; used by the acceptance suite."""
    for mask in range(1 << N):
        if _dprime_of_mask(mask, N) > _d_of_mask(mask, N) + 1:
            return False
    return True


def subset_sum_bound(n1, n2, n3, N: int) -> tuple[Fraction, Fraction, bool]:
    """Exact lhs = sum over subsets J of n1^(N-|J|-d) n2^(|J|-d) n3^(2d) and
    rhs = (n1+n2+n3)^N, compared in rational arithmetic.

    The exponents N-|J|-d and |J|-d are nonnegative because d cannot exceed
    either block count.  N > 20 is refused (2^N enumeration).
    """
    if N < 1:
        raise ValueError("need N >= 1")
    if N > SUBSET_SUM_MAX_N:
        raise BudgetError(f"subset enumeration refused for N = {N} > {SUBSET_SUM_MAX_N}")
    f1, f2, f3 = Fraction(n1), Fraction(n2), Fraction(n3)
    if f1 <= 0 or f2 <= 0 or f3 <= 0:
        raise ValueError("n1, n2, n3 must be positive")
    lhs = Fraction(0)
    for (j, d), cnt in _jd_count_table(N).items():
        lhs += cnt * f1 ** (N - j - d) * f2 ** (j - d) * f3 ** (2 * d)
    rhs = (f1 + f2 + f3) ** N
    return lhs, rhs, lhs <= rhs
