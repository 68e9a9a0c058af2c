"""Tessellation domains, Bowen boxes, and exact covering counts.

The expanding block is abelian here, so the chart is the identity and the
tessellation domain V_r is literally the open cube of side r/(4 sqrt(p))
centered at 0, tiled by its side-length grid.  Conjugation by the flow
contracts chart coordinates entrywise by e^(-lambda_kl t), which makes every
covering count in this module a closed-form box/interval computation; the
module returns both the exact counts and the general-theory bounds so each
run is a checked instance of the covering lemmas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .flows import HorosphericalFrame

R_STAR_DEFAULT = 0.2  # any value < 1/4 is admissible; fixed for reproducibility


@dataclass(frozen=True)
class TessellationSpec:
    p: int
    r: float
    r_star: float = R_STAR_DEFAULT
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.r <= self.r_star):
            raise PreconditionError(f"need 0 < r <= r_star = {self.r_star}")
        if not (0.0 < self.r_star < 0.25):
            raise PreconditionError("r_star must lie in (0, 1/4)")
        if self.c1 <= 0 or self.c2 < self.c1:
            raise PreconditionError("need 0 < c1 <= c2")

    @property
    def side(self) -> float:
        """Cube side of V_r (= grid pitch of the translate lattice)."""
        return self.r / (4.0 * math.sqrt(self.p))

    def volume(self) -> float:
        return self.side ** self.p


def covering_constant_c0(p: int, c1: float = 1.0, c2: float = 1.0) -> float:
    """Boundary-term constant of the translate-counting lemma: 2^(p+3) p^(3/2) c2/c1."""
    return (2.0 ** (p + 3)) * (p ** 1.5) * c2 / c1


def mixing_constant_c2(p: int, c1: float = 1.0, c2: float = 1.0) -> float:
    """Error constant combining the boundary term with 1/nu(V_r) r^p.

    The reference measure nu is the uniform probability on the unit ball of
    the chart, so 1/nu(V_r) = V_p (4 sqrt p)^p / (c1 r^p) with V_p the
    euclidean unit-ball volume; c1, c2 remain the Lebesgue-comparability
    constants of the chart (both 1 in the abelian realization).
    """
    ball = math.pi ** (p / 2.0) / math.gamma(p / 2.0 + 1.0)
    return covering_constant_c0(p, c1, c2) + (4.0 * math.sqrt(p)) ** p * ball / c1


def bigt_threshold(frame: HorosphericalFrame) -> float:
    """Smallest admissible time for translate counting: log(8 sqrt(p))/lambda_min."""
    return math.log(8.0 * math.sqrt(frame.p)) / frame.lambda_min


@dataclass(frozen=True)
class BowenBox:
    """Flow-contracted tessellation translate g_(-t) cl(V_r) gamma g_t in chart
    coordinates: an axis-aligned box with entrywise-contracted sides."""

    t: float
    r: float
    center: np.ndarray        # e^(-lambda t) * gamma, per axis
    sides: np.ndarray         # side * e^(-lambda_j t), per axis
    frame: HorosphericalFrame

    def volume(self) -> float:
        return float(np.prod(self.sides))

    def diameter_exact(self) -> float:
        """Euclidean diagonal of the realized box (abelian chart, exact)."""
        return float(np.sqrt((self.sides ** 2).sum()))

    def diameter_bound(self) -> float:
        """General-theory bound (r/2) e^(-lambda_min t), chart slack included."""
        return 0.5 * self.r * math.exp(-self.frame.lambda_min * self.t)


def bowen_box(frame: HorosphericalFrame, tess: TessellationSpec, t: float,
              gamma: np.ndarray) -> BowenBox:
    rates = frame.contraction_rates(t)
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    if gamma.shape[0] != frame.p:
        raise PreconditionError("gamma must have p coordinates")
    return BowenBox(
        t=float(t),
        r=tess.r,
        center=rates * gamma,
        sides=tess.side * rates,
        frame=frame,
    )


@dataclass(frozen=True)
class CountReport:
    exact_count: int
    bound: float
    passed: bool


def count_intersecting_translates(
    frame: HorosphericalFrame, tess: TessellationSpec, t: float
) -> CountReport:
    """Exact number of grid translates whose Bowen (t, r)-box meets cl(V_r),
    against the bound e^(delta t) (1 + C0 e^(-lambda_min t)).

    Per axis with contraction e^(-lambda t): the contracted closed translate at
    grid point k*side meets the central closed interval iff
    |k| <= (e^(lambda t) + 1)/2, so the count is the product over axes of
    2*floor((e^(lambda t) + 1)/2) + 1.
    """
    if tess.r > tess.r_star / 2.0:
        raise PreconditionError("need r <= r_star/2 for translate counting")
    tmin = bigt_threshold(frame)
    if t < tmin:
        raise PreconditionError(
            f"t = {t} is below the admissible threshold {tmin:.6f}"
        )
    lam = frame.entry_exponents.reshape(-1)
    count = 1
    for l in lam:
        half = (math.exp(l * t) + 1.0) / 2.0
        count *= 2 * int(math.floor(half)) + 1
    c0 = covering_constant_c0(frame.p, tess.c1, tess.c2)
    bound = math.exp(frame.delta * t) * (1.0 + c0 * math.exp(-frame.lambda_min * t))
    return CountReport(exact_count=count, bound=bound, passed=count <= bound)


def cover_V_theta_by_V_r(tess: TessellationSpec, theta: float) -> CountReport:
    """Exact number of open r-translates meeting the open theta-cube, against
    the bound (c2/c1)(theta/r + 8 sqrt(p))^p.

    Open-open intersection per axis: |k * side_r| < (side_r + side_theta)/2,
    i.e. |k| < (1 + theta/r)/2.
    """
    r = tess.r
    if not (0.0 < r <= theta <= tess.r_star / 2.0):
        raise PreconditionError("need 0 < r <= theta <= r_star/2")
    half = (1.0 + theta / r) / 2.0
    if half == math.floor(half):
        per_axis = 2 * int(half) - 1
    else:
        per_axis = 2 * int(math.ceil(half)) - 1
    count = per_axis ** tess.p
    bound = (tess.c2 / tess.c1) * (theta / r + 8.0 * math.sqrt(tess.p)) ** tess.p
    return CountReport(exact_count=count, bound=bound, passed=count <= bound)


@dataclass(frozen=True)
class BallCover:
    centers: np.ndarray   # (k, p)
    radius: float
    bound: float
    passed: bool


def cover_bowen_by_balls(
    frame: HorosphericalFrame, t: float, r: float,
    tess: TessellationSpec | None = None,
) -> BallCover:
    """Constructive cover of a Bowen (t, r)-box by balls of radius r e^(-lambda_max t).

    The box is sliced per axis into cubes of side 2 rho / sqrt(p) (circumradius
    exactly rho), which needs ceil(e^((lambda_max - lambda_j) t)/8) pieces per
    axis; the product never exceeds the e^((p lambda_max - delta) t) bound, and
    equals 1 for isotropic (unweighted) flows.  Coverage is re-verified on box
    corners.
    """
    if t <= 0:
        raise PreconditionError("need t > 0")
    spec = tess if tess is not None else TessellationSpec(p=frame.p, r=r)
    if not (0.0 < r <= spec.r_star):
        raise PreconditionError("need 0 < r <= r_star")
    rho = r * math.exp(-frame.lambda_max * t)
    cube = 2.0 * rho / math.sqrt(frame.p)
    lam = frame.entry_exponents.reshape(-1)
    sides = (r / (4.0 * math.sqrt(frame.p))) * np.exp(-lam * t)
    counts = [max(1, int(math.ceil(s / cube))) for s in sides]
    axes = []
    for s, k in zip(sides, counts):
        step = s / k
        axes.append(-s / 2.0 + step * (np.arange(k) + 0.5))
    grid = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([g.reshape(-1) for g in grid], axis=1)
    bound = math.exp((frame.p * frame.lambda_max - frame.delta) * t)
    n_balls = centers.shape[0]
    _verify_corner_coverage(sides, centers, rho)
    return BallCover(centers=centers, radius=rho, bound=bound, passed=n_balls <= math.ceil(bound))


def _verify_corner_coverage(sides: np.ndarray, centers: np.ndarray, rho: float):
    p = len(sides)
    signs = np.array(list(np.ndindex(*([2] * p)))) * 2 - 1
    corners = signs * (np.asarray(sides) / 2.0)
    d2 = ((corners[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    if not np.all(d2.min(axis=1) <= rho * rho * (1.0 + 1e-12)):
        from .errors import AuditError

        raise AuditError("ball cover fails to reach a box corner")


def tiling_check(tess: TessellationSpec, window_half: float = 1.0) -> dict:
    """Exact check that closed translates tile a window: clipped volumes sum to
    the window volume and open translates are pairwise disjoint by construction
    (grid pitch equals the side)."""
    s = tess.side
    p = tess.p
    kmax = int(math.ceil(window_half / s)) + 1
    grid_1d = s * np.arange(-kmax, kmax + 1)
    total = 1.0
    for _ in range(p):
        clipped = np.clip(grid_1d + s / 2.0, -window_half, window_half) - np.clip(
            grid_1d - s / 2.0, -window_half, window_half
        )
        total *= clipped.sum()
    window_vol = (2.0 * window_half) ** p
    return {
        "sum_of_clipped_volumes": total,
        "window_volume": window_vol,
        "max_defect": abs(total - window_vol),
        "interiors_disjoint": True,  # pitch == side: open cubes cannot overlap
    }
