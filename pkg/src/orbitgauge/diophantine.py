"""Dirichlet-improvable systems of linear forms: arithmetic and dynamical sides.

All norms here are supremum norms.  The arithmetic side searches integer
(p, q) with the rounding choice of p (optimal in sup norm); witnesses are
re-verified in exact rational arithmetic (floats taken as the dyadic
rationals they are, powers kept integral so no roots are needed).  The
dynamical side tests sup-norm shortest vectors along the diagonal orbit of
the affine lattice; the two sides are linked by N = c^(m/(m+n)) e^(m t), and
knife-edge disagreements inside a declared 1% band around the threshold are
reported rather than hidden.

"For all sufficiently large N" is operationalized as "for every N in the
requested range": results echo the range, the first failing N, and the last
checked N, and never claim the tail quantifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BudgetError, PreconditionError
from .lattice import _shortest_vector_raw

SCAN_WORK_LIMIT = 20_000_000
BOUNDARY_BAND = 0.01


def parse_matrix(obj, m: int, n: int) -> np.ndarray:
    """m x n matrix from nested lists; entries may be floats or 'num/den' strings."""
    rows = []
    for row in obj if isinstance(obj[0], (list, tuple)) else [obj]:
        rows.append([float(Fraction(e)) if isinstance(e, str) else float(e) for e in row])
    mat = np.asarray(rows, dtype=float)
    if mat.shape != (m, n):
        raise PreconditionError(f"matrix must be {m}x{n}, got {mat.shape}")
    return mat


@dataclass(frozen=True)
class DIQuery:
    m: int
    n: int
    Y_list: list[np.ndarray]
    c: float
    N_range: tuple[int, int]

    def __post_init__(self):
        if not (0.0 < self.c <= 1.0):
            raise PreconditionError("need c in (0, 1]")
        lo, hi = self.N_range
        if lo > hi or lo < 2:
            raise PreconditionError("N range must be non-empty with N >= 2")
        for Y in self.Y_list:
            if Y.shape != (self.m, self.n):
                raise PreconditionError("all matrices must be m x n")


@dataclass
class DIResult:
    N_values: list[int]
    improvable: list[bool]
    witnesses: dict = field(default_factory=dict)  # N -> (p tuple, q tuple, i)
    all_improvable: bool = False
    margin: float = math.inf      # min over N of relative threshold slack
    first_failure_N: int | None = None
    last_checked_N: int = 0

    def to_json_obj(self) -> dict:
        return {
            "N_values": self.N_values,
            "improvable": self.improvable,
            "witnesses": {str(k): {"p": list(v[0]), "q": list(v[1]), "i": v[2]}
                          for k, v in self.witnesses.items()},
            "all_improvable": self.all_improvable,
            "margin": self.margin,
            "first_failure_N": self.first_failure_N,
            "last_checked_N": self.last_checked_N,
        }


def verify_witness_exact(Y: np.ndarray, p, q, c, N, m: int, n: int) -> bool:
    """Exact strict check of |Yq - p|_sup < c N^(-n/m) and 0 < |q|_sup < N.

    Compared as |Yq - p|^m N^n < c^m so only integer powers appear.
    """
    Yf = [[Fraction(float(v)) for v in row] for row in Y]
    qf = [Fraction(int(v)) for v in q]
    pf = [Fraction(int(v)) for v in p]
    Nf = Fraction(N) if not isinstance(N, Fraction) else N
    cf = Fraction(c) if not isinstance(c, Fraction) else c
    qnorm = max(abs(v) for v in qf)
    if not (0 < qnorm < Nf):
        return False
    err = Fraction(0)
    for i in range(m):
        v = sum(Yf[i][j] * qf[j] for j in range(n)) - pf[i]
        err = max(err, abs(v))
    return err ** m * Nf ** n < cf ** m


def _dist_profile(y: float, q_max: int) -> np.ndarray:
    """dist(q y, Z) for q = 1..q_max (m = n = 1 fast path)."""
    q = np.arange(1, q_max + 1, dtype=float)
    vals = q * y
    return np.abs(vals - np.rint(vals))


def _improvable_single_11(y: float, c: float, N_values: np.ndarray):
    """Vectorized per-N answers for a single real number via prefix minima."""
    q_max = int(N_values.max()) - 1
    dist = _dist_profile(y, q_max)
    prefix = np.minimum.accumulate(dist)
    argmin = np.zeros(q_max, dtype=int)
    best = dist[0]
    bi = 0
    for i in range(q_max):
        if dist[i] < best:
            best = dist[i]
            bi = i
        argmin[i] = bi
    m_at = prefix[N_values - 2]          # min over q <= N-1
    ok = m_at < c / N_values
    margins = 1.0 - m_at * N_values / c
    return ok, margins, argmin[N_values - 2] + 1


def is_dirichlet_improvable(query: DIQuery) -> DIResult:
    """Per-N exact answers for a single matrix by exhaustive search over q
    (nearest-integer p), with exact witness re-verification."""
    if len(query.Y_list) != 1:
        raise PreconditionError("single-matrix query must carry exactly one Y")
    return is_jointly_di(query)


def is_jointly_di(query: DIQuery) -> DIResult:
    """Per-N OR over the tuple of the single-matrix predicate; witnesses carry
    the succeeding index."""
    m, n, c = query.m, query.n, query.c
    lo, hi = query.N_range
    N_values = np.arange(lo, hi + 1)
    if m == 1 and n == 1:
        work = len(query.Y_list) * hi
    else:
        work = len(query.Y_list) * sum((2 * N) ** n for N in range(lo, hi + 1))
    if hi > 10_000 or m * n > 4 or work > SCAN_WORK_LIMIT:
        feasible = _max_feasible_N(len(query.Y_list), n, lo)
        raise BudgetError(
            f"exhaustive search budget exceeded; maximal feasible N is ~{feasible}"
        )
    res = DIResult(N_values=N_values.tolist(), improvable=[False] * len(N_values),
                   last_checked_N=int(hi))
    if m == 1 and n == 1:
        per = [
            _improvable_single_11(float(Y[0, 0]), c, N_values) for Y in query.Y_list
        ]
        margin = math.inf
        for j, N in enumerate(N_values):
            margin = min(margin, max(per[i][1][j] for i in range(len(per))))
            for i, (ok, _, wq) in enumerate(per):
                if not ok[j]:
                    continue
                y = float(query.Y_list[i][0, 0])
                q_w = int(wq[j])
                p_w = int(round(q_w * y))
                if verify_witness_exact(query.Y_list[i], [p_w], [q_w], c, int(N), 1, 1):
                    res.improvable[j] = True
                    res.witnesses[int(N)] = ((p_w,), (q_w,), i)
                    break
                exact = _exact_improvable_11(y, c, int(N))  # float knife edge
                if exact is not None:
                    res.improvable[j] = True
                    res.witnesses[int(N)] = ((exact[0],), (exact[1],), i)
                    break
        res.margin = margin
    else:
        res.margin = math.inf
        for j, N in enumerate(N_values):
            found = None
            best_rel = -math.inf
            thr = c * float(N) ** (-n / m)
            for i, Y in enumerate(query.Y_list):
                for q in _integer_box(n, int(N) - 1):
                    Yq = Y @ q
                    p = np.rint(Yq)
                    err = float(np.max(np.abs(Yq - p)))
                    best_rel = max(best_rel, 1.0 - err / thr)
                    if err < thr and verify_witness_exact(
                        Y, [int(v) for v in p], [int(v) for v in q], c, int(N), m, n
                    ):
                        found = (tuple(int(v) for v in p), tuple(int(v) for v in q), i)
                        break
                if found:
                    break
            if found:
                res.improvable[j] = True
                res.witnesses[int(N)] = found
            res.margin = min(res.margin, best_rel)
    res.all_improvable = all(res.improvable)
    for j, ok in enumerate(res.improvable):
        if not ok:
            res.first_failure_N = int(N_values[j])
            break
    return res


def _exact_improvable_11(y: float, c: float, N: int) -> tuple[int, int] | None:
    """Exact rational rescan of one N for m = n = 1 (knife-edge fallback)."""
    yf = Fraction(y)
    cf = Fraction(c)
    for q in range(1, N):
        v = yf * q
        p = round(v)
        if abs(v - p) * N < cf:
            return int(p), q
    return None


def _integer_box(n: int, qmax: int):
    if n == 1:
        for q in range(1, qmax + 1):
            yield np.array([q])
        return
    for q0 in range(-qmax, qmax + 1):
        for q1 in range(-qmax, qmax + 1):
            if q0 == 0 and q1 == 0:
                continue
            if (q0, q1) < (-q0, -q1):
                continue  # sign symmetry
            yield np.array([q0, q1])


def _max_feasible_N(k: int, n: int, lo: int) -> int:
    total = 0
    N = lo
    while total <= SCAN_WORK_LIMIT and N <= 10_000:
        total += k * (2 * N) ** n
        N += 1
    return max(lo, N - 1)


# ---------------------------------------------------------------------------
# Dynamical side
# ---------------------------------------------------------------------------

def affine_lattice_matrix(Y: np.ndarray, m: int, n: int) -> np.ndarray:
    """Block matrix [[I_m, Y], [0, I_n]] acting on Z^(m+n)."""
    d = m + n
    g = np.eye(d)
    g[:m, m:] = Y
    return g


def t_start(c: float, m: int) -> float:
    """Start of the 'sufficiently large t' window used by the orbit check."""
    return max(1.0, math.log(1.0 / c) / m)


@dataclass(frozen=True)
class OrbitCheckResult:
    t_values: list[float]
    below_threshold: list[bool]
    margins: list[float]          # relative distance of the minimum to the threshold
    threshold: float

    def to_json_obj(self) -> dict:
        return {"t_values": self.t_values, "below_threshold": self.below_threshold,
                "margins": self.margins, "threshold": self.threshold}


def dani_orbit_check(query: DIQuery, t_grid: list[float]) -> OrbitCheckResult:
    """Per-t test: does some nonzero vector of some g_t h_(Y_i) Z^(m+n) drop
    below the sup-norm threshold c^(m/(m+n))?"""
    m, n = query.m, query.n
    thr = query.c ** (m / (m + n))
    exps = np.array([float(n)] * m + [float(-m)] * n)
    below, margins = [], []
    for t in t_grid:
        if abs(max(exps) * t) > 25.0:
            raise BudgetError("orbit time exceeds the enumeration budget")
        gt = np.diag(np.exp(exps * t))
        best = math.inf
        for Y in query.Y_list:
            mat = gt @ affine_lattice_matrix(Y, m, n)
            norm, _, _, _ = _shortest_vector_raw(mat, "supremum")
            best = min(best, norm)
        below.append(best < thr)
        margins.append(abs(best / thr - 1.0))
    return OrbitCheckResult(
        t_values=[float(t) for t in t_grid],
        below_threshold=below,
        margins=margins,
        threshold=thr,
    )


def correspondence_time(N: float, c: float, m: int, n: int) -> float:
    """t with N = c^(m/(m+n)) e^(m t)."""
    return math.log(N / c ** (m / (m + n))) / m


@dataclass(frozen=True)
class CorrespondenceAudit:
    agreements: int
    disagreements: int
    disagreements_outside_band: int
    band: float

    @property
    def passed(self) -> bool:
        return self.disagreements_outside_band == 0


def correspondence_audit(
    ys: list[float], c: float, N_values: list[float],
) -> CorrespondenceAudit:
    """Check the per-N arithmetic answer against the per-t dynamical answer at
    the matching times, allowing knife-edge flips inside the declared band."""
    agree = 0
    disagree = 0
    outside = 0
    for y in ys:
        Y = np.array([[float(y)]])
        for N in N_values:
            qmax = int(math.ceil(N)) - 1
            if qmax < 1:
                continue
            dist = _dist_profile(float(y), qmax)
            arith = bool((dist < c / N).any())
            t = correspondence_time(float(N), c, 1, 1)
            orbit = dani_orbit_check(
                DIQuery(m=1, n=1, Y_list=[Y], c=c, N_range=(2, 2)), [t]
            )
            dyn = orbit.below_threshold[0]
            if arith == dyn:
                agree += 1
            else:
                disagree += 1
                if orbit.margins[0] >= BOUNDARY_BAND:
                    outside += 1
    return CorrespondenceAudit(
        agreements=agree, disagreements=disagree,
        disagreements_outside_band=outside, band=BOUNDARY_BAND,
    )


def rational_improvability_bound(num: int, den: int) -> int:
    """Any rational num/den is improvable for every c > 0 once N > den: q = den
    gives an exact zero form value."""
    return den + 1


# ---------------------------------------------------------------------------
# Dimension scans (m = n = 1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanResult:
    survivors: np.ndarray         # boolean field over the grid
    fraction: float
    estimate: "object"            # DimensionEstimate
    N_min: int
    N_max: int
    grid_bits: int


def survives_all_N(ys: np.ndarray, c: float, N_min: int, N_max: int) -> np.ndarray:
    """Vectorized: improvable for every integer N in [N_min, N_max]."""
    q_max = N_max - 1
    q = np.arange(1, q_max + 1, dtype=float)
    out = np.ones(ys.shape[0], dtype=bool)
    chunk = max(1, int(4_000_000 // q_max))
    Ns = np.arange(N_min, N_max + 1)
    thr = c / Ns
    for start in range(0, ys.shape[0], chunk):
        block = ys[start : start + chunk]
        vals = block[:, None] * q[None, :]
        dist = np.abs(vals - np.rint(vals))
        prefix = np.minimum.accumulate(dist, axis=1)
        ok = prefix[:, Ns - 2] < thr[None, :]
        out[start : start + chunk] = ok.all(axis=1)
    return out


def di_dimension_scan(
    c: float, m: int, n: int, k: int, N_max: int, grid_bits: int, N_min: int = 10,
) -> ScanResult:
    """Box-counting estimate of the finite-range improvable set on a dyadic grid.

    Only m = n = 1 with k <= 2 is feasible on a grid; the estimate is reported
    with its finite horizon and never as a limit claim.
    """
    from .dimension import box_count_dimension

    if not (m == 1 and n == 1 and k in (1, 2)):
        raise BudgetError("dimension scans support m = n = 1 and k <= 2")
    if grid_bits > 22:
        raise BudgetError("grid too fine")
    size = 1 << grid_bits
    if k == 1:
        ys = (np.arange(size) + 0.5) / size
        surv = survives_all_N(ys, c, N_min, N_max)
        field = surv
        scales = list(range(2, max(5, grid_bits - 6) + 1))
    else:
        half_bits = grid_bits // 2
        axis = 1 << half_bits
        ys = (np.arange(axis) + 0.5) / axis
        q_max = N_max - 1
        q = np.arange(1, q_max + 1, dtype=float)
        vals = ys[:, None] * q[None, :]
        dist = np.abs(vals - np.rint(vals))
        prefix = np.minimum.accumulate(dist, axis=1)
        Ns = np.arange(N_min, N_max + 1)
        per_axis_ok = prefix[:, Ns - 2] < (c / Ns)[None, :]
        field = np.zeros((axis, axis), dtype=bool)
        for i in range(axis):
            field[i] = np.all(per_axis_ok[i][None, :] | per_axis_ok, axis=1)
        surv = field
        scales = list(range(2, max(5, half_bits - 2) + 1))
    frac = float(np.asarray(surv).mean())
    estimate = box_count_dimension(
        np.asarray(field), scales,
        horizon={"N_min": N_min, "N_max": N_max, "grid_bits": grid_bits, "k": k},
    )
    return ScanResult(
        survivors=np.asarray(field), fraction=frac, estimate=estimate,
        N_min=N_min, N_max=N_max, grid_bits=grid_bits,
    )
