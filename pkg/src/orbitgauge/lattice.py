"""Exact and sampled arithmetic on unimodular lattices.

A point of the lattice space is stored as a d x d matrix of determinant one
whose columns generate the lattice.  Shortest vectors are found by exhaustive
enumeration over a certified coefficient box (cheap and exact for d <= 3);
sampling at d = 2 uses the standard fundamental domain of the modular surface,
where the hyperbolic measure and the systole law are known in closed form.

Batch kernels (``systole_batch``, ``tau_batch``, ...) are the vectorized
counterparts used by the Monte-Carlo modules; they are cross-checked against
the scalar exact routines in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import PreconditionError

DET_TOL = 1e-9
COND_LIMIT = 1e12

#: Hermite bound for the euclidean systole of a unimodular planar lattice.
HERMITE_2D = (4.0 / 3.0) ** 0.25


@dataclass(frozen=True)
class LatticeBasis:
    """Unimodular lattice basis; columns of ``cols`` generate the lattice."""

    cols: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.cols, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise PreconditionError("basis must be a square matrix")
        if mat.shape[0] not in (2, 3):
            raise PreconditionError("lattice dimension must be 2 or 3")
        det = float(np.linalg.det(mat))
        if abs(det - 1.0) > DET_TOL:
            raise PreconditionError(f"basis not unimodular: det = {det!r}")
        object.__setattr__(self, "cols", mat)

    @property
    def dim(self) -> int:
        return self.cols.shape[0]

    def to_json_obj(self) -> dict:
        # Row-major nested lists, matching the on-the-wire schema.
        return {"dim": self.dim, "cols": self.cols.tolist()}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "LatticeBasis":
        return cls(np.asarray(obj["cols"], dtype=float))

    @classmethod
    def standard(cls, dim: int = 2) -> "LatticeBasis":
        return cls(np.eye(dim))


@dataclass(frozen=True)
class ShortVectorResult:
    vector: tuple[int, ...]       # coefficients in the given basis
    embedded: np.ndarray
    norm: float
    norm_kind: str
    enumeration_radius: float     # certificate: the box searched covers this radius


@dataclass(frozen=True)
class ShapePoint2D:
    """Point of the standard fundamental domain, Re tau in (-1/2, 1/2], |tau| >= 1."""

    tau: complex

    @property
    def x(self) -> float:
        return self.tau.real

    @property
    def y(self) -> float:
        return self.tau.imag


def _vec_norm(v: np.ndarray, norm_kind: str) -> float:
    if norm_kind == "euclidean":
        return float(np.linalg.norm(v))
    if norm_kind == "supremum":
        return float(np.max(np.abs(v)))
    raise PreconditionError(f"unknown norm kind {norm_kind!r}")


def _coefficient_box(mat: np.ndarray, radius: float, norm_kind: str) -> list[int]:
    """Per-coordinate bound on |c_i| for lattice vectors of norm <= radius.

    From c = B^{-1} x: |c_i| <= |row_i(B^{-1})|_* |x|, with the dual pairing
    matching the norm the radius is measured in.
    """
    inv = np.linalg.inv(mat)
    if norm_kind == "euclidean":
        rows = np.linalg.norm(inv, axis=1)
    else:
        rows = np.abs(inv).sum(axis=1)
    return [int(math.floor(r * radius * (1.0 + 1e-12) + 1e-12)) for r in rows]


def _sign_normalize(coeffs: tuple[int, ...]) -> tuple[int, ...]:
    for c in coeffs:
        if c != 0:
            return coeffs if c > 0 else tuple(-x for x in coeffs)
    return coeffs


def shortest_vector(basis: LatticeBasis, norm_kind: str = "euclidean") -> ShortVectorResult:
    """Minimal-norm nonzero lattice vector, exact for d <= 3.

    Enumeration runs over the full coefficient box certified to contain every
    lattice vector of norm <= the initial upper bound (the shortest basis
    column), so the returned minimum is global.  Equal-norm minima are
    sign-normalized (first nonzero coefficient positive) and the
    lexicographically greatest coefficient tuple is returned; on the square
    lattice this selects (1, 0).
    """
    mat = basis.cols
    cond = float(np.linalg.cond(mat))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise PreconditionError(f"ill-conditioned basis rejected: cond = {cond:.3e}")
    norm, coeffs, embedded, radius = _shortest_vector_raw(mat, norm_kind)
    return ShortVectorResult(
        vector=coeffs,
        embedded=embedded,
        norm=norm,
        norm_kind=norm_kind,
        enumeration_radius=radius,
    )


def _pair_reduce(mat: np.ndarray, max_iter: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Greedy pairwise size reduction: returns (reduced, U) with reduced = mat @ U
    and U integer unimodular.  Keeps enumeration boxes small for flow-skewed
    bases; exactness is unaffected since U only re-parameterizes the lattice."""
    d = mat.shape[0]
    red = np.array(mat, dtype=float, copy=True)
    U = np.eye(d, dtype=np.int64)
    for _ in range(max_iter):
        order = np.argsort([np.dot(red[:, j], red[:, j]) for j in range(d)])
        red = red[:, order]
        U = U[:, order]
        changed = False
        for i in range(d):
            ni = float(np.dot(red[:, i], red[:, i]))
            if ni == 0.0:
                continue
            for j in range(d):
                if i == j:
                    continue
                mu = round(float(np.dot(red[:, i], red[:, j])) / ni)
                if mu != 0:
                    red[:, j] -= mu * red[:, i]
                    U[:, j] -= mu * U[:, i]
                    changed = True
        if not changed:
            break
    return red, U


def _shortest_vector_raw(mat: np.ndarray, norm_kind: str):
    """Core enumeration without the LatticeBasis wrapper (any small square mat).

    The basis is size-reduced first so the certified coefficient box stays
    small; coefficients are mapped back to the original basis for output."""
    d = mat.shape[0]
    red, U = _pair_reduce(mat)
    col_norms = [_vec_norm(red[:, j], norm_kind) for j in range(d)]
    radius = min(n for n in col_norms if n > 0)
    bounds = _coefficient_box(red, radius, norm_kind)
    if np.prod([2 * b + 1 for b in bounds]) > 2_000_000:
        raise PreconditionError("shortest-vector enumeration box too large")
    best_norm = math.inf
    best: list[tuple[int, ...]] = []
    for coeffs in product(*[range(-b, b + 1) for b in bounds]):
        if all(c == 0 for c in coeffs):
            continue
        v = red @ np.asarray(coeffs, dtype=float)
        n = _vec_norm(v, norm_kind)
        if n < best_norm * (1.0 - 1e-12):
            best_norm = n
            best = [coeffs]
        elif n <= best_norm * (1.0 + 1e-12):
            best_norm = min(best_norm, n)
            best.append(coeffs)
    if not best:
        raise PreconditionError("enumeration box came up empty; basis degenerate?")
    originals = {
        _sign_normalize(tuple(int(v) for v in (U @ np.asarray(c, dtype=np.int64))))
        for c in best
    }
    coeffs = sorted(originals)[-1]
    embedded = mat @ np.asarray(coeffs, dtype=float)
    return _vec_norm(embedded, norm_kind), coeffs, embedded, radius


def shortest_vector_bruteforce(
    basis: LatticeBasis, norm_kind: str = "euclidean", box: int = 4
) -> ShortVectorResult:
    """Test oracle: plain scan over the fixed coefficient box |c_i| <= box."""
    mat = basis.cols
    d = mat.shape[0]
    best_norm = math.inf
    best: list[tuple[int, ...]] = []
    for coeffs in product(range(-box, box + 1), repeat=d):
        if all(c == 0 for c in coeffs):
            continue
        n = _vec_norm(mat @ np.asarray(coeffs, dtype=float), norm_kind)
        if n < best_norm * (1.0 - 1e-12):
            best_norm, best = n, [coeffs]
        elif n <= best_norm * (1.0 + 1e-12):
            best_norm = min(best_norm, n)
            best.append(coeffs)
    coeffs = sorted({_sign_normalize(c) for c in best})[-1]
    embedded = mat @ np.asarray(coeffs, dtype=float)
    return ShortVectorResult(
        vector=coeffs,
        embedded=embedded,
        norm=_vec_norm(embedded, norm_kind),
        norm_kind=norm_kind,
        enumeration_radius=float(box),
    )


def systole(basis: LatticeBasis, norm_kind: str = "euclidean") -> float:
    return shortest_vector(basis, norm_kind).norm


# ---------------------------------------------------------------------------
# Shape coordinates at d = 2
# ---------------------------------------------------------------------------

_BOUNDARY_TOL = 1e-12


def _normalize_tau(tau: complex) -> complex:
    """Translate/invert into the closed fundamental domain, then fix boundaries
    to the Re in (-1/2, 1/2] / (Re >= 0 on |tau| = 1) convention."""
    for _ in range(256):
        shift = math.floor(tau.real + 0.5)
        if shift != 0:
            tau = complex(tau.real - shift, tau.imag)
        if abs(tau) ** 2 < 1.0 - _BOUNDARY_TOL:
            tau = -1.0 / tau
            continue
        if shift == 0:
            break
    else:  # pragma: no cover
        raise PreconditionError("shape reduction did not converge")
    if tau.real <= -0.5:
        tau = complex(tau.real + 1.0, tau.imag)
    if abs(abs(tau) ** 2 - 1.0) <= _BOUNDARY_TOL and tau.real < 0.0:
        tau = -1.0 / tau
    return tau


def reduce_shape_2d(basis: LatticeBasis) -> ShapePoint2D:
    """Gauss-reduced shape of a planar lattice, rescaled to covolume one."""
    if basis.dim != 2:
        raise PreconditionError("shape reduction requires dim = 2")
    b1 = basis.cols[:, 0]
    b2 = basis.cols[:, 1]
    z1 = complex(b1[0], b1[1])
    z2 = complex(b2[0], b2[1])
    tau = z2 / z1
    if tau.imag < 0:
        tau = -tau  # Z z1 + Z z2 = Z z1 + Z(-z2)
    return ShapePoint2D(_normalize_tau(tau))


def basis_from_tau(tau: complex, rotation: float = 0.0) -> LatticeBasis:
    """Unimodular basis whose lattice has shape ``tau`` (covolume rescaled to 1)."""
    y = tau.imag
    if y <= 0:
        raise PreconditionError("tau must lie in the upper half-plane")
    s = 1.0 / math.sqrt(y)
    mat = np.array([[s, tau.real * s], [0.0, y * s]])
    if rotation != 0.0:
        c, sn = math.cos(rotation), math.sin(rotation)
        mat = np.array([[c, -sn], [sn, c]]) @ mat
    mat = mat / math.sqrt(abs(np.linalg.det(mat)))
    return LatticeBasis(mat)


def hyperbolic_distance(t1: complex, t2: complex) -> float:
    d2 = abs(t1 - t2) ** 2
    arg = 1.0 + d2 / (2.0 * t1.imag * t2.imag)
    return math.acosh(max(arg, 1.0))


def dist_proxy(x: LatticeBasis, y: LatticeBasis) -> float:
    """Hyperbolic distance between reduced shapes.

    Surrogate for the right-invariant metric restricted to shape coordinates;
    bi-Lipschitz on compacta, symmetric, zero iff the shapes agree.
    """
    if x.dim != 2 or y.dim != 2:
        raise PreconditionError("dist_proxy supports dim = 2 only")
    return hyperbolic_distance(reduce_shape_2d(x).tau, reduce_shape_2d(y).tau)


# ---------------------------------------------------------------------------
# Haar sampling at d = 2
# ---------------------------------------------------------------------------

Y_MIN = math.sqrt(3.0) / 2.0


def sample_haar_tau(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    """n draws of (x, y) from the normalized hyperbolic measure on the
    fundamental domain.

    Proposal: x uniform on [-1/2, 1/2], y = Y_MIN / u with u uniform (inverse
    transform for the dy/y^2 tail); accept when x^2 + y^2 >= 1.  Acceptance
    rate is (pi/3) / (2/sqrt(3)) ~ 0.907.
    """
    xs = np.empty(n)
    ys = np.empty(n)
    filled = 0
    while filled < n:
        want = n - filled
        m = int(want / 0.9) + 16
        x = rng.uniform(-0.5, 0.5, size=m)
        u = rng.uniform(0.0, 1.0, size=m)
        u = np.where(u == 0.0, 1.0, u)
        y = Y_MIN / u
        ok = x * x + y * y >= 1.0
        k = min(int(ok.sum()), want)
        xs[filled : filled + k] = x[ok][:k]
        ys[filled : filled + k] = y[ok][:k]
        filled += k
    return xs, ys


def sample_haar_2d(rng: np.random.Generator) -> LatticeBasis:
    """One Haar sample of the d = 2 lattice space, circle fiber included."""
    x, y = sample_haar_tau(rng, 1)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    return basis_from_tau(complex(x[0], y[0]), rotation=phi)


# ---------------------------------------------------------------------------
# Vectorized 2x2 kernels
# ---------------------------------------------------------------------------

def lagrange_reduce_batch(bases: np.ndarray, max_iter: int = 96) -> np.ndarray:
    """Gauss/Lagrange-reduce a batch of 2x2 column bases.

    Returns bases with |b1| <= |b2| and |<b1, b2>| <= |b1|^2 / 2.  Raises if
    any instance fails to stabilize (never observed below cond ~ 1e14).
    """
    out = np.array(bases, dtype=float, copy=True)
    for _ in range(max_iter):
        b1 = out[:, :, 0]
        b2 = out[:, :, 1]
        n1 = np.einsum("ij,ij->i", b1, b1)
        n2 = np.einsum("ij,ij->i", b2, b2)
        swap = n2 < n1
        if swap.any():
            out[swap] = out[swap][:, :, ::-1]
            b1 = out[:, :, 0]
            b2 = out[:, :, 1]
            n1 = np.where(swap, n2, n1)
        dot = np.einsum("ij,ij->i", b1, b2)
        mu = np.rint(dot / n1)
        active = mu != 0.0
        if not active.any() and not swap.any():
            break
        out[:, :, 1] -= mu[:, None] * b1
    else:  # pragma: no cover
        raise PreconditionError("batch reduction failed to converge")
    return out


def systole_batch(bases: np.ndarray) -> np.ndarray:
    """Euclidean systole for a batch of 2x2 bases (exact via reduction)."""
    red = lagrange_reduce_batch(bases)
    n1 = np.sqrt(np.einsum("ij,ij->i", red[:, :, 0], red[:, :, 0]))
    return n1


_SUP_COMBOS = np.array(
    [(a, b) for a in range(-3, 4) for b in range(-3, 4) if (a, b) != (0, 0)], dtype=float
)


def sup_systole_batch(bases: np.ndarray) -> np.ndarray:
    """Supremum-norm systole for a batch of 2x2 bases.

    After euclidean reduction the sup-norm minimum has coefficients in the
    |c_i| <= 3 box (reduced bases have angle >= 60 degrees), so a fixed 48-way
    enumeration is exact.  Agreement with the scalar enumerator is covered by
    tests.
    """
    red = lagrange_reduce_batch(bases)
    # vectors: (n, 2, 48) = bases @ combos^T
    vecs = np.einsum("nij,kj->nik", red, _SUP_COMBOS)
    norms = np.max(np.abs(vecs), axis=1)
    return norms.min(axis=1)


def tau_batch(bases: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced shape coordinates (x, y) for a batch of 2x2 bases."""
    red = lagrange_reduce_batch(bases)
    b1 = red[:, :, 0]
    b2 = red[:, :, 1]
    n1 = np.einsum("ij,ij->i", b1, b1)
    dot = np.einsum("ij,ij->i", b1, b2)
    det = np.abs(b1[:, 0] * b2[:, 1] - b1[:, 1] * b2[:, 0])
    x = dot / n1
    y = det / n1
    # Lagrange reduction already gives |x| <= 1/2 and x^2 + y^2 >= 1; snap the
    # Re = -1/2 boundary to +1/2 and reflect |tau| = 1 points with Re < 0.
    flip = x <= -0.5
    x = np.where(flip, x + 1.0, x)
    r2 = x * x + y * y
    on_circle = np.abs(r2 - 1.0) <= 1e-9
    reflect = on_circle & (x < 0.0)
    x = np.where(reflect, -x, x)
    return x, y


def hyperbolic_distance_batch(x: np.ndarray, y: np.ndarray, tau0: complex) -> np.ndarray:
    d2 = (x - tau0.real) ** 2 + (y - tau0.imag) ** 2
    arg = 1.0 + d2 / (2.0 * y * tau0.imag)
    return np.arccosh(np.maximum(arg, 1.0))


def bases_from_tau_batch(
    x: np.ndarray, y: np.ndarray, phi: np.ndarray | None = None
) -> np.ndarray:
    """Batch of unimodular 2x2 bases from shape coordinates, optionally rotated."""
    s = 1.0 / np.sqrt(y)
    n = x.shape[0]
    mats = np.zeros((n, 2, 2))
    mats[:, 0, 0] = s
    mats[:, 0, 1] = x * s
    mats[:, 1, 1] = y * s
    if phi is not None:
        c, sn = np.cos(phi), np.sin(phi)
        rot = np.zeros((n, 2, 2))
        rot[:, 0, 0] = c
        rot[:, 0, 1] = -sn
        rot[:, 1, 0] = sn
        rot[:, 1, 1] = c
        mats = np.einsum("nij,njk->nik", rot, mats)
    return mats
