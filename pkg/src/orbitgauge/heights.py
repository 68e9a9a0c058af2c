"""Height functions, Margulis-inequality measurement, iteration and escape bounds.

The height family is u = max(1, systole^(-s)); it is proper and regular, with
regularity constant C = e^(2 s kappa) over displacement balls of radius 2 and
expansion rate alpha = s max|a_k| along the flow.  The averaging measure nu is
the uniform probability on the unit ball of the expanding block; sub-ball
masses are tracked explicitly (nothing is renormalized per region), matching
the un-normalized integrals the iteration and escape bounds are stated with.

The sup over base points in a true Margulis inequality is not computable; the
checker replaces it with a published finite panel, and the iteration/escape
verifiers re-test the closed-form bounds by direct Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .flows import FlowSpec, HorosphericalFrame, apply_flow_shear_batch
from .lattice import LatticeBasis, basis_from_tau, systole, systole_batch


def unit_ball_volume(p: int) -> float:
    return math.pi ** (p / 2.0) / math.gamma(p / 2.0 + 1.0)


def sample_unit_ball(rng: np.random.Generator, n: int, p: int, radius: float = 1.0) -> np.ndarray:
    """Uniform draws from the euclidean ball of the given radius in R^p."""
    if p == 1:
        return rng.uniform(-radius, radius, size=(n, 1))
    g = rng.standard_normal(size=(n, p))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / p)
    return g * r


@dataclass(frozen=True)
class HeightFunctionSpec:
    """u(Lambda) = max(1, systole(Lambda)^(-s)) with declared constants."""

    s: float = 0.5
    kappa: float = 1.0   # log-systole Lipschitz constant of the surrogate metric

    def __post_init__(self):
        if not (0.0 < self.s < 1.0):
            raise PreconditionError("height exponent s must lie in (0, 1)")

    @property
    def regularity_constant(self) -> float:
        return math.exp(2.0 * self.s * self.kappa)

    def expansion_rate(self, flow: FlowSpec) -> float:
        return self.s * max(abs(a) for a in flow.exponents)

    def value(self, basis: LatticeBasis) -> float:
        return max(1.0, systole(basis) ** (-self.s))

    def value_batch(self, bases: np.ndarray) -> np.ndarray:
        if bases.shape[1] == 2:
            return np.maximum(1.0, systole_batch(bases) ** (-self.s))
        return np.array([max(1.0, systole(LatticeBasis(b)) ** (-self.s)) for b in bases])

    def sublevel_systole(self, M: float) -> float:
        """Systole floor of the compact sublevel set {u <= M}."""
        return M ** (-1.0 / self.s)

    def panel_point(self, u_target: float) -> LatticeBasis:
        """d = 2 lattice with u exactly at the target (tau = i y on the cusp ray)."""
        if u_target < 1.0:
            raise PreconditionError("height values are >= 1")
        y = u_target ** (2.0 / self.s) if u_target > 1.0 else 1.0
        return basis_from_tau(complex(0.0, y))

    def injectivity_radius_floor(self, u_value: float, m0: float = 1.0) -> float:
        """Proxy coupling between injectivity radius and height: sublevel sets
        {u <= M} have shape-systole at least M^(-1/s), so the surrogate
        injectivity radius is bounded below by m0 M^(-1/s).  A documented
        stand-in, not a claim about the true right-invariant metric."""
        return m0 * u_value ** (-1.0 / self.s)


@dataclass(frozen=True)
class RegionSpec:
    """Averaging region inside the unit ball of the block: a centered ball or box."""

    kind: str                     # "ball" | "box"
    radius: float = 1.0           # ball radius
    halfwidths: tuple[float, ...] = ()

    def mass(self, p: int) -> float:
        """nu-mass with nu the uniform probability on the unit ball."""
        if self.kind == "ball":
            return self.radius ** p
        vol = 1.0
        for h in self.halfwidths:
            vol *= 2.0 * h
        return vol / unit_ball_volume(p)

    def sample(self, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
        if self.kind == "ball":
            if self.radius > 1.0:
                raise PreconditionError("region must sit inside the unit ball")
            return sample_unit_ball(rng, n, p, self.radius)
        lo = -np.asarray(self.halfwidths)
        hi = np.asarray(self.halfwidths)
        return rng.uniform(lo, hi, size=(n, p))


@dataclass(frozen=True)
class OperatorEstimate:
    value: float
    std_error: float
    region_mass: float
    n_samples: int


def integral_operator(
    region: RegionSpec,
    t: float,
    psi,
    x: LatticeBasis,
    n_samples: int,
    rng: np.random.Generator,
    frame: HorosphericalFrame,
) -> OperatorEstimate:
    """Monte-Carlo estimate of the averaged translate integral of psi.

    psi is a callable on a batch of bases (HeightFunctionSpec.value_batch, a
    target indicator, or any vectorized function).  The estimator multiplies
    the sample mean by the region's nu-mass, so sub-ball regions are reported
    un-normalized, as the iteration bounds require.
    """
    if n_samples <= 0:
        raise PreconditionError("need n_samples >= 1")
    coords = region.sample(rng, int(n_samples), frame.p)
    bases = apply_flow_shear_batch(frame, t, coords, x)
    vals = np.asarray(psi(bases), dtype=float)
    mass = region.mass(frame.p)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return OperatorEstimate(value=mass * mean, std_error=mass * se,
                            region_mass=mass, n_samples=int(n_samples))


def integral_operator_grid(
    region: RegionSpec, t: float, psi, x: LatticeBasis, n_nodes: int,
    frame: HorosphericalFrame,
) -> float:
    """Deterministic midpoint-rule cross-check for p = 1 regions."""
    if frame.p != 1:
        raise PreconditionError("grid quadrature implemented for p = 1")
    if region.kind == "ball":
        half = region.radius
    else:
        half = region.halfwidths[0]
    nodes = (-half + (np.arange(n_nodes) + 0.5) * (2.0 * half / n_nodes)).reshape(-1, 1)
    bases = apply_flow_shear_batch(frame, t, nodes, x)
    vals = np.asarray(psi(bases), dtype=float)
    return region.mass(1) * float(vals.mean())


@dataclass(frozen=True)
class MargulisReport:
    t: float
    c_hat: float
    d_hat: float
    sigma: float
    n_samples: int
    passed: bool
    panel_u: list[float] = field(default_factory=list)
    panel_ratios: list[float] = field(default_factory=list)
    panel_sigmas: list[float] = field(default_factory=list)
    regularity_constant: float = 0.0
    alpha: float = 0.0
    flags: list[str] = field(default_factory=list)
    sup_domain: str = ""

    def to_json_obj(self) -> dict:
        return {
            "t": self.t,
            "c_hat": self.c_hat,
            "d_hat": self.d_hat,
            "sigma": self.sigma,
            "n_samples": self.n_samples,
            "passed": self.passed,
            "panel_u": self.panel_u,
            "panel_ratios": self.panel_ratios,
            "panel_sigmas": self.panel_sigmas,
            "regularity_constant": self.regularity_constant,
            "alpha": self.alpha,
            "flags": self.flags,
            "sup_domain": self.sup_domain,
            "surrogate_metric": True,
        }


def margulis_check(
    height: HeightFunctionSpec,
    flow: FlowSpec,
    frame: HorosphericalFrame,
    t: float,
    x_panel: list[LatticeBasis],
    n_samples: int,
    rng: np.random.Generator,
) -> MargulisReport:
    """Estimate the contraction constant of the unit-ball averaging operator.

    d_hat is the operator value at the standard lattice (a cusp-free anchor);
    c_hat is the panel maximum of (I u(x) - d_hat)/u(x), clamped at zero.  The
    panel is published in the report because the true sup over the space is
    not computable; the claim is exactly as falsifiable as the panel is wide.
    """
    if not x_panel:
        raise PreconditionError("panel must be non-empty")
    flags: list[str] = []
    if t <= 0:
        flags.append("t_below_useful_range")
    region = RegionSpec(kind="ball", radius=1.0)
    base = LatticeBasis.standard(flow.dim)
    floor_est = integral_operator(region, t, height.value_batch, base, n_samples, rng, frame)
    d_hat = floor_est.value
    u_vals, ratios, sigmas = [], [], []
    for x in x_panel:
        u_x = height.value(x)
        est = integral_operator(region, t, height.value_batch, x, n_samples, rng, frame)
        u_vals.append(u_x)
        ratios.append((est.value - d_hat) / u_x)
        sigmas.append(math.sqrt(est.std_error ** 2 + floor_est.std_error ** 2) / u_x)
    if max(u_vals) < 2.0:
        flags.append("degenerate_panel_contraction_unobservable")
    idx = int(np.argmax(ratios))
    c_hat = max(0.0, ratios[idx])
    sigma = sigmas[idx]
    return MargulisReport(
        t=t,
        c_hat=c_hat,
        d_hat=d_hat,
        sigma=sigma,
        n_samples=int(n_samples),
        passed=(c_hat + 3.0 * sigma < 1.0) and t > 0,
        panel_u=u_vals,
        panel_ratios=ratios,
        panel_sigmas=sigmas,
        regularity_constant=height.regularity_constant,
        alpha=height.expansion_rate(flow),
        flags=flags,
        sup_domain=f"finite panel of {len(x_panel)} points, u in "
                   f"[{min(u_vals):.3g}, {max(u_vals):.3g}]",
    )


def iterate_margulis_bound(c0: float, d_t: float, N: int, u_x: float) -> float:
    """Closed-form N-fold iteration bound c0^N u(x) + d_t/(1 - c0)."""
    if not (0.0 < c0 < 1.0):
        raise PreconditionError("need 0 < c0 < 1")
    if N < 1:
        raise PreconditionError("need N >= 1")
    return c0 ** N * u_x + d_t / (1.0 - c0)


@dataclass(frozen=True)
class VerifierResult:
    lhs: float
    bound: float
    sigma: float
    passed: bool

    def to_json_obj(self) -> dict:
        return {"lhs": self.lhs, "bound": self.bound, "sigma": self.sigma,
                "passed": self.passed}


def verify_iterated_margulis(
    height: HeightFunctionSpec,
    frame: HorosphericalFrame,
    t: float,
    N: int,
    x: LatticeBasis,
    c0: float,
    d_t: float,
    n_samples: int,
    rng: np.random.Generator,
) -> VerifierResult:
    """Monte-Carlo check of the half-ball average at time N t against the
    iteration bound (3-sigma one-sided)."""
    region = RegionSpec(kind="ball", radius=0.5)
    est = integral_operator(region, N * t, height.value_batch, x, n_samples, rng, frame)
    bound = iterate_margulis_bound(c0, d_t, N, height.value(x))
    return VerifierResult(
        lhs=est.value, bound=bound, sigma=est.std_error,
        passed=est.value <= bound + 3.0 * est.std_error,
    )


@dataclass(frozen=True)
class EscapeBoundInput:
    c: float
    d: float
    alpha: float
    t: float
    C: float
    N: int
    k: int
    u_x: float
    ell_override: float | None = None

    def __post_init__(self):
        if not (0.0 < self.c < 1.0):
            raise PreconditionError("need 0 < c < 1")
        if self.d <= 0:
            raise PreconditionError("need d > 0")
        if self.k < 2:
            raise PreconditionError("need k >= 2")
        if self.N < 1:
            raise PreconditionError("need N >= 1")
        if self.ell_override is not None and self.ell_override < max(
            self.d / self.c, math.exp(self.alpha * self.t)
        ):
            raise PreconditionError("ell must dominate both d/c and e^(alpha t)")

    @property
    def ell(self) -> float:
        if self.ell_override is not None:
            return self.ell_override
        return max(self.d / self.c, math.exp(self.alpha * self.t))


def escape_mass_bound(inp: EscapeBoundInput) -> float:
    """(4c/(1-c))^N max(u(x), d) / ell^2: mass bound for deep-cusp avoidance."""
    return ((4.0 * inp.c / (1.0 - inp.c)) ** inp.N
            * max(inp.u_x, inp.d) / inp.ell ** 2)


def verify_escape_mass(
    height: HeightFunctionSpec,
    frame: HorosphericalFrame,
    inp: EscapeBoundInput,
    theta: float,
    x: LatticeBasis,
    n_samples: int,
    rng: np.random.Generator,
    r_star: float = 0.2,
) -> VerifierResult:
    """Estimate the nu-mass of translates staying above the height threshold
    C^2 ell^2 at every multiple of k t, against the closed-form bound."""
    if not (0.0 < theta <= r_star):
        raise PreconditionError("need 0 < theta <= r_star")
    p = frame.p
    side = theta / (4.0 * math.sqrt(p))
    coords = rng.uniform(-side / 2.0, side / 2.0, size=(int(n_samples), p))
    threshold = inp.C ** 2 * inp.ell ** 2
    alive = np.ones(int(n_samples), dtype=bool)
    for i in range(1, inp.N + 1):
        bases = apply_flow_shear_batch(frame, i * inp.k * inp.t, coords, x)
        alive &= height.value_batch(bases) > threshold
        if not alive.any():
            break
    frac = float(alive.mean())
    cube_mass = side ** p / unit_ball_volume(p)
    est = cube_mass * frac
    se = cube_mass * math.sqrt(max(frac * (1 - frac), 1.0 / n_samples) / n_samples)
    bound = escape_mass_bound(inp)
    return VerifierResult(lhs=est, bound=bound, sigma=se,
                          passed=est <= bound + 3.0 * se)
