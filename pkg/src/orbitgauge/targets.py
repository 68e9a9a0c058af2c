"""Symbolic target sets on the lattice space and their measure estimation.

A target set supports exact membership per lattice, a vectorized membership
over batches of 2x2 bases, and a conservative inner-core operation: the
returned core is a subset of the set for every declared log-systole Lipschitz
constant kappa of the surrogate metric (default 1), so measure estimates of
cores are one-sided by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .lattice import (
    LatticeBasis,
    hyperbolic_distance,
    hyperbolic_distance_batch,
    reduce_shape_2d,
    sample_haar_tau,
    bases_from_tau_batch,
    sup_systole_batch,
    systole,
    systole_batch,
    tau_batch,
)

#: Declared log-systole Lipschitz constant of the surrogate metric.
KAPPA = 1.0


@dataclass(frozen=True)
class TargetSet:
    """Open (or closed, for complements / Dirichlet thresholds) subset of X.

    kind is one of: whole, empty, systole_below, systole_above, shape_ball,
    sup_systole_at_least, dirichlet, complement, product.
    """

    kind: str
    eps: float = 0.0                      # threshold for systole kinds
    center: complex = 1j                  # shape_ball
    rho: float = 0.0                      # shape_ball
    c: float = 1.0                        # dirichlet
    m: int = 1                            # dirichlet
    n: int = 1                            # dirichlet
    inner: "TargetSet | None" = None      # complement
    factors: tuple["TargetSet", ...] = () # product

    # -- constructors -------------------------------------------------------

    @staticmethod
    def whole() -> "TargetSet":
        return TargetSet(kind="whole")

    @staticmethod
    def empty() -> "TargetSet":
        return TargetSet(kind="empty")

    @staticmethod
    def systole_below(eps: float) -> "TargetSet":
        return TargetSet(kind="systole_below", eps=float(eps))

    @staticmethod
    def systole_above(eps: float) -> "TargetSet":
        return TargetSet(kind="systole_above", eps=float(eps))

    @staticmethod
    def shape_ball(center: complex, rho: float) -> "TargetSet":
        return TargetSet(kind="shape_ball", center=complex(center), rho=float(rho))

    @staticmethod
    def sup_systole_at_least(eps: float) -> "TargetSet":
        return TargetSet(kind="sup_systole_at_least", eps=float(eps))

    @staticmethod
    def dirichlet(c: float, m: int, n: int) -> "TargetSet":
        """Lattices with no nonzero vector of sup-norm below c^(m/(m+n))."""
        return TargetSet(kind="dirichlet", c=float(c), m=int(m), n=int(n))

    @staticmethod
    def complement(inner: "TargetSet") -> "TargetSet":
        return TargetSet(kind="complement", inner=inner)

    @staticmethod
    def product(factors: list["TargetSet"]) -> "TargetSet":
        return TargetSet(kind="product", factors=tuple(factors))

    # -- membership ---------------------------------------------------------

    @property
    def dirichlet_threshold(self) -> float:
        return self.c ** (self.m / (self.m + self.n))

    def membership(self, x) -> bool:
        """Exact membership; x is a LatticeBasis (a tuple of them for products)."""
        k = self.kind
        if k == "whole":
            return True
        if k == "empty":
            return False
        if k == "systole_below":
            return systole(x) < self.eps
        if k == "systole_above":
            return systole(x) > self.eps
        if k == "shape_ball":
            tau = reduce_shape_2d(x).tau
            return hyperbolic_distance(tau, self.center) < self.rho
        if k == "sup_systole_at_least":
            return systole(x, "supremum") >= self.eps
        if k == "dirichlet":
            return systole(x, "supremum") >= self.dirichlet_threshold
        if k == "complement":
            return not self.inner.membership(x)
        if k == "product":
            return all(f.membership(xi) for f, xi in zip(self.factors, x))
        raise PreconditionError(f"unknown target kind {k!r}")

    def membership_batch(self, bases: np.ndarray) -> np.ndarray:
        """Vectorized membership over a batch of 2x2 bases (scalar fallback
        for other dimensions)."""
        k = self.kind
        if k == "whole":
            return np.ones(bases.shape[0], dtype=bool)
        if k == "empty":
            return np.zeros(bases.shape[0], dtype=bool)
        if bases.shape[1] != 2:
            return np.array([self.membership(LatticeBasis(b)) for b in bases])
        if k == "systole_below":
            return systole_batch(bases) < self.eps
        if k == "systole_above":
            return systole_batch(bases) > self.eps
        if k == "shape_ball":
            x, y = tau_batch(bases)
            return hyperbolic_distance_batch(x, y, self.center) < self.rho
        if k in ("sup_systole_at_least", "dirichlet"):
            thr = self.eps if k == "sup_systole_at_least" else self.dirichlet_threshold
            return sup_systole_batch(bases) >= thr
        if k == "complement":
            return ~self.inner.membership_batch(bases)
        raise PreconditionError(f"no batch membership for target kind {k!r}")

    def describe(self) -> str:
        k = self.kind
        if k == "systole_below":
            return f"systole-below:{self.eps:g}"
        if k == "systole_above":
            return f"systole-above:{self.eps:g}"
        if k == "shape_ball":
            return f"shape-ball:{self.center.real:g}+{self.center.imag:g}i:{self.rho:g}"
        if k == "sup_systole_at_least":
            return f"sup-systole-at-least:{self.eps:g}"
        if k == "dirichlet":
            return f"dirichlet:c={self.c:g},m={self.m},n={self.n}"
        if k == "complement":
            return f"complement({self.inner.describe()})"
        if k == "product":
            return "product(" + ",".join(f.describe() for f in self.factors) + ")"
        return k


def parse_target(spec: str) -> TargetSet:
    """CLI syntax: whole | empty | systole-below:EPS | systole-above:EPS |
    shape-ball:X:Y:RHO | dirichlet:C:M:N | complement(SPEC)."""
    s = spec.strip()
    if s.startswith("complement(") and s.endswith(")"):
        return TargetSet.complement(parse_target(s[len("complement(") : -1]))
    parts = s.split(":")
    head = parts[0]
    if head == "whole":
        return TargetSet.whole()
    if head == "empty":
        return TargetSet.empty()
    if head == "systole-below":
        return TargetSet.systole_below(float(parts[1]))
    if head == "systole-above":
        return TargetSet.systole_above(float(parts[1]))
    if head == "shape-ball":
        return TargetSet.shape_ball(complex(float(parts[1]), float(parts[2])), float(parts[3]))
    if head == "sup-systole-at-least":
        return TargetSet.sup_systole_at_least(float(parts[1]))
    if head == "dirichlet":
        return TargetSet.dirichlet(float(parts[1]), int(parts[2]), int(parts[3]))
    raise PreconditionError(f"cannot parse target spec {spec!r}")


def inner_core(target: TargetSet, r: float, kappa: float = KAPPA) -> TargetSet:
    """Conservative inner r-core: a target subset whose every point stays in
    the original set under any displacement of size <= r.

    Threshold kinds move their systole cutoff by the Lipschitz envelope
    e^(kappa r); shape balls shrink by r; cores of whole/empty are themselves
    (distance to an empty complement is +infinity by convention).
    """
    if r < 0:
        raise PreconditionError("core radius must be >= 0")
    k = target.kind
    if k in ("whole", "empty"):
        return target
    if k == "systole_above":
        return TargetSet.systole_above(target.eps * math.exp(kappa * r))
    if k == "systole_below":
        return TargetSet.systole_below(target.eps * math.exp(-kappa * r))
    if k == "shape_ball":
        if target.rho <= r:
            return TargetSet.empty()
        return TargetSet.shape_ball(target.center, target.rho - r)
    if k == "sup_systole_at_least":
        return TargetSet.sup_systole_at_least(target.eps * math.exp(kappa * r))
    if k == "dirichlet":
        return TargetSet.sup_systole_at_least(target.dirichlet_threshold * math.exp(kappa * r))
    if k == "product":
        return TargetSet.product([inner_core(f, r, kappa) for f in target.factors])
    raise PreconditionError(f"inner core unsupported for target kind {k!r}")


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    std_error: float
    n_samples: int
    exact: bool = False


def measure_of_target(
    target: TargetSet,
    n_samples: int,
    rng: np.random.Generator,
    dim: int = 2,
) -> MeasureEstimate:
    """Monte-Carlo estimate of the Haar measure of a target set at d = 2.

    Whole space and empty set are returned exactly.  Shape-only kinds are
    evaluated on fundamental-domain coordinates; sup-norm kinds draw the
    circle fiber as well.  d = 3 has no exact sampler and is refused.
    """
    if dim != 2:
        raise PreconditionError("measure estimation supported at d = 2 only")
    if _is_trivial(target):
        return MeasureEstimate(1.0 if _trivial_value(target) else 0.0, 0.0, 0, exact=True)
    if n_samples <= 0:
        raise PreconditionError("need n_samples >= 1")
    hits = 0
    total = 0
    chunk = min(int(n_samples), 1_000_000)
    needs_fiber = _needs_fiber(target)
    while total < n_samples:
        m = min(chunk, n_samples - total)
        x, y = sample_haar_tau(rng, m)
        if needs_fiber:
            phi = rng.uniform(0.0, 2.0 * math.pi, size=m)
            bases = bases_from_tau_batch(x, y, phi)
            mask = target.membership_batch(bases)
        else:
            mask = _membership_tau(target, x, y)
        hits += int(mask.sum())
        total += m
    p = hits / n_samples
    if hits in (0, n_samples):
        se = 1.0 / n_samples  # conservative binomial bound at the boundary
    else:
        se = math.sqrt(p * (1.0 - p) / n_samples)
    return MeasureEstimate(p, se, int(n_samples))


def _is_trivial(t: TargetSet) -> bool:
    if t.kind in ("whole", "empty"):
        return True
    if t.kind == "complement":
        return _is_trivial(t.inner)
    return False


def _trivial_value(t: TargetSet) -> bool:
    if t.kind == "whole":
        return True
    if t.kind == "empty":
        return False
    return not _trivial_value(t.inner)


def _needs_fiber(t: TargetSet) -> bool:
    if t.kind in ("sup_systole_at_least", "dirichlet"):
        return True
    if t.kind == "complement":
        return _needs_fiber(t.inner)
    return False


def _membership_tau(t: TargetSet, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Fast path on fundamental-domain coordinates: the euclidean systole of a
    reduced shape is y^(-1/2)."""
    k = t.kind
    if k == "whole":
        return np.ones_like(x, dtype=bool)
    if k == "empty":
        return np.zeros_like(x, dtype=bool)
    if k == "systole_below":
        return 1.0 / np.sqrt(y) < t.eps
    if k == "systole_above":
        return 1.0 / np.sqrt(y) > t.eps
    if k == "shape_ball":
        return hyperbolic_distance_batch(x, y, t.center) < t.rho
    if k == "complement":
        return ~_membership_tau(t.inner, x, y)
    raise PreconditionError(f"no shape-coordinate membership for kind {k!r}")
