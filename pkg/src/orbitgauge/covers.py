"""Avoidance-set samplers and the recursive Bowen-box cover.

The recursion mirrors the inductive covering argument: at each level the
tessellation translates whose contracted boxes can still meet the surviving
stratum are kept (membership probed at box corners plus center) and the walk
restarts from the translated base point.  Corner probing can in principle
miss a stratum sliver, so every shipped run is audited against an independent
grid sampling of the avoidance set; a missed node is a hard error, never a
warning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AuditError, BudgetError, PreconditionError
from .flows import FlowSpec, HorosphericalFrame, apply_flow_shear_batch
from .lattice import LatticeBasis
from .targets import TargetSet
from .tessellation import TessellationSpec

GRID_NODE_LIMIT = 100_000_000
FRONTIER_LIMIT = 5_000_000


@dataclass(frozen=True)
class AvoidanceQuery:
    x: LatticeBasis
    flow: FlowSpec
    frame: HorosphericalFrame
    t: float
    r: float
    target: TargetSet          # the set orbits must stay inside (e.g. complement of O)
    N: int
    r_star: float = 0.2

    def __post_init__(self):
        if self.r > self.r_star:
            raise PreconditionError("need r <= r_star")
        if self.N < 1:
            raise PreconditionError("need N >= 1")


def _window_nodes(side: float, res: int, p: int) -> np.ndarray:
    axis = -side / 2.0 + side * (np.arange(res) + 0.5) / res
    if p == 1:
        return axis.reshape(-1, 1)
    grids = np.meshgrid(*([axis] * p), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def sample_avoidance_set(q: AvoidanceQuery, grid_resolution: int) -> np.ndarray:
    """Indicator field over the window cube: node h survives iff g_(l t) h x
    stays in the target for every l = 1..N.  Exact membership per node."""
    if grid_resolution < 2:
        raise PreconditionError("need at least 2 nodes per axis")
    p = q.frame.p
    if grid_resolution ** p > GRID_NODE_LIMIT:
        raise BudgetError("avoidance grid exceeds the node limit")
    side = q.r / (4.0 * math.sqrt(p))
    coords = _window_nodes(side, grid_resolution, p)
    alive = np.ones(coords.shape[0], dtype=bool)
    for l in range(1, q.N + 1):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        bases = apply_flow_shear_batch(q.frame, l * q.t, coords[idx], q.x)
        alive[idx] &= q.target.membership_batch(bases)
    if p == 1:
        return alive
    return alive.reshape((grid_resolution,) * p)


@dataclass
class RecursiveCover:
    centers: np.ndarray          # (n_boxes, p), chart coordinates
    sides: np.ndarray            # (p,), common side lengths theta-box contracted N times
    level_counts: list[int]
    theta: float
    audit_nodes_checked: int
    audit_passed: bool
    count: int = 0
    bound: float | None = None
    margin: float | None = None

    def to_json_obj(self) -> dict:
        return {
            "count": self.count,
            "sides": self.sides.tolist(),
            "level_counts": self.level_counts,
            "theta": self.theta,
            "audit_nodes_checked": self.audit_nodes_checked,
            "audit_passed": self.audit_passed,
            "bound": self.bound,
            "margin": self.margin,
            "centers": self.centers.tolist(),
        }


def _probe_offsets(side_theta: float, p: int) -> np.ndarray:
    """Corners plus center of the theta-cube, relative to its center."""
    signs = np.array(list(np.ndindex(*([2] * p)))) * 2 - 1
    corners = signs * (side_theta / 2.0)
    return np.vstack([corners, np.zeros((1, p))])


def recursive_cover(
    q: AvoidanceQuery,
    theta: float,
    audit_resolution: int = 4096,
    mu_sigma_r_O: float | None = None,
    lambda_hat: float | None = None,
    tess: TessellationSpec | None = None,
) -> RecursiveCover:
    """Cover the avoidance set by Bowen (N t, theta)-boxes, inductively.

    Level 1 keeps translates whose contracted theta-box meets the r-window and
    whose probes hit the stratum; deeper levels re-center on the translated
    base point with the theta-window.  The returned boxes are then audited:
    every surviving node of an independent grid sampling must lie in some box.

    When mu_sigma_r_O (measured core mass of the complement target) and a
    fitted decay rate are supplied, the run also reports the one-sided count
    bound e^(delta N t) (1 - mu + C2 r^-p e^(-lambda t))^N and the margin;
    both use measured surrogate constants and are labelled as such upstream.
    """
    frame, t, r, N = q.frame, q.t, q.r, q.N
    p = frame.p
    if not (q.r <= theta <= q.r_star / 2.0 + 1e-15):
        raise PreconditionError("need r <= theta <= r_star/2")
    lam = frame.entry_exponents.reshape(-1)
    side_r = r / (4.0 * math.sqrt(p))
    side_theta = theta / (4.0 * math.sqrt(p))
    contraction = np.exp(-lam * t)
    min_side = side_theta * float(np.exp(-lam * t).min()) ** N
    if min_side < 1e-12:
        raise PreconditionError("contraction budget exhausted: box sides below 1e-12")
    probes = _probe_offsets(side_theta, p)

    def candidate_axis(window_half: float, j: int) -> np.ndarray:
        reach = window_half + side_theta * contraction[j] / 2.0
        kmax = int(math.floor(reach / (side_theta * contraction[j]) + 1e-12))
        return side_theta * np.arange(-kmax, kmax + 1)

    def candidates(window_half: float) -> np.ndarray:
        axes = [candidate_axis(window_half, j) for j in range(p)]
        if p == 1:
            return axes[0].reshape(-1, 1)
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    # frontier: chain centers in original chart coordinates + current base matrix
    centers = np.zeros((1, p))
    scales = np.ones(p)            # cumulative contraction applied to new translates
    bases_cur = q.x.cols[None, :, :]
    level_counts: list[int] = []
    gt = q.flow.matrix(t)
    fast = frame.m == 1 and frame.n == 1
    for level in range(1, N + 1):
        window_half = side_r / 2.0 if level == 1 else side_theta / 2.0
        cand = candidates(window_half)
        n_front = bases_cur.shape[0]
        n_cand = cand.shape[0]
        n_probe = probes.shape[0]
        if n_front * n_cand * n_probe > FRONTIER_LIMIT:
            raise BudgetError("recursive cover frontier exceeds the budget")
        # A box point h = e^(-lam t)(gamma + w) satisfies g_t shear(h) x in S
        # iff shear(gamma + w) (g_t x) does: probe the translated base directly.
        probe_pts = (cand[:, None, :] + probes[None, :, :]).reshape(-1, p)
        geom = np.all(
            np.abs(contraction * cand) <= window_half + side_theta * contraction / 2.0 + 1e-12,
            axis=1,
        )
        pushed_bases = np.einsum("ab,nbc->nac", gt, bases_cur)
        dets = np.linalg.det(pushed_bases)
        pushed_bases /= dets[:, None, None] ** (1.0 / pushed_bases.shape[1])
        if fast:
            w = probe_pts.reshape(-1)
            blk = np.empty((n_front, w.size, 2, 2))
            blk[:, :, 0, 0] = pushed_bases[:, None, 0, 0] + w[None, :] * pushed_bases[:, None, 1, 0]
            blk[:, :, 0, 1] = pushed_bases[:, None, 0, 1] + w[None, :] * pushed_bases[:, None, 1, 1]
            blk[:, :, 1, 0] = pushed_bases[:, None, 1, 0]
            blk[:, :, 1, 1] = pushed_bases[:, None, 1, 1]
            hits = q.target.membership_batch(blk.reshape(-1, 2, 2))
            hit = hits.reshape(n_front, n_cand, n_probe).any(axis=2)
            keep = hit & geom[None, :]
            fi, cj = np.nonzero(keep)
            new_centers = centers[fi] + (scales * contraction)[None, :] * cand[cj]
            gam = cand[cj].reshape(-1)
            new_bases = np.empty((fi.size, 2, 2))
            new_bases[:, 0, 0] = pushed_bases[fi, 0, 0] + gam * pushed_bases[fi, 1, 0]
            new_bases[:, 0, 1] = pushed_bases[fi, 0, 1] + gam * pushed_bases[fi, 1, 1]
            new_bases[:, 1, 0] = pushed_bases[fi, 1, 0]
            new_bases[:, 1, 1] = pushed_bases[fi, 1, 1]
        else:
            kept_centers = []
            kept_bases = []
            for i in range(n_front):
                pushed = _shear_apply_batch(frame, probe_pts, pushed_bases[i])
                hit = q.target.membership_batch(pushed).reshape(n_cand, -1).any(axis=1)
                for gamma in cand[hit & geom]:
                    kept_centers.append(centers[i] + scales * contraction * gamma)
                    kept_bases.append(_shear(frame, gamma) @ pushed_bases[i])
            new_centers = np.asarray(kept_centers).reshape(-1, p)
            new_bases = (np.asarray(kept_bases) if kept_bases
                         else np.zeros((0,) + q.x.cols.shape))
        level_counts.append(int(new_centers.shape[0]))
        centers = new_centers
        bases_cur = new_bases
        scales = scales * contraction
        if centers.shape[0] == 0:
            break
    sides = side_theta * contraction ** N
    cover = RecursiveCover(
        centers=centers,
        sides=sides,
        level_counts=level_counts,
        theta=theta,
        audit_nodes_checked=0,
        audit_passed=False,
        count=centers.shape[0],
    )
    _audit_cover(q, cover, audit_resolution)
    if mu_sigma_r_O is not None and lambda_hat is not None:
        from .tessellation import mixing_constant_c2

        c2c = mixing_constant_c2(p)
        per_step = 1.0 - mu_sigma_r_O + c2c * r ** (-p) * math.exp(-lambda_hat * t)
        cover.bound = math.exp(frame.delta * N * t) * per_step ** N
        cover.margin = cover.bound - cover.count
    return cover


def _shear(frame: HorosphericalFrame, coords: np.ndarray) -> np.ndarray:
    m, n = frame.m, frame.n
    d = m + n
    g = np.eye(d)
    g[:m, m:] = np.asarray(coords, dtype=float).reshape(m, n)
    return g


def _shear_apply_batch(frame: HorosphericalFrame, coords: np.ndarray,
                       mat: np.ndarray) -> np.ndarray:
    """Batch of shear(w) @ mat over chart coordinates w."""
    k = coords.shape[0]
    if frame.m == 1 and frame.n == 1:
        w = coords.reshape(-1)
        out = np.empty((k, 2, 2))
        out[:, 0, 0] = mat[0, 0] + w * mat[1, 0]
        out[:, 0, 1] = mat[0, 1] + w * mat[1, 1]
        out[:, 1, 0] = mat[1, 0]
        out[:, 1, 1] = mat[1, 1]
        return out
    mats = np.empty((k, mat.shape[0], mat.shape[1]))
    for i, w in enumerate(np.asarray(coords, dtype=float)):
        mats[i] = _shear(frame, w) @ mat
    return mats


def _renorm(mat: np.ndarray) -> np.ndarray:
    det = float(np.linalg.det(mat))
    if abs(det - 1.0) > 1e-12:
        mat = mat / (det ** (1.0 / mat.shape[0]))
    return mat


def _audit_cover(q: AvoidanceQuery, cover: RecursiveCover, resolution: int):
    """Hard soundness check: every grid node of the sampled avoidance set must
    lie inside some returned box."""
    p = q.frame.p
    field_res = resolution if p == 1 else max(2, int(resolution ** (1.0 / p)))
    field = sample_avoidance_set(q, field_res)
    side = q.r / (4.0 * math.sqrt(p))
    nodes = _window_nodes(side, field_res, p)
    alive = field.reshape(-1)
    pts = nodes[alive]
    cover.audit_nodes_checked = int(pts.shape[0])
    if pts.shape[0] == 0:
        cover.audit_passed = True
        return
    if cover.centers.shape[0] == 0:
        raise AuditError("avoidance nodes exist but the cover is empty")
    half = cover.sides / 2.0 + 1e-12
    if p == 1:
        # merge the (equal-width) box intervals, then locate nodes by bisection
        lo = np.sort(cover.centers[:, 0]) - half[0]
        hi = lo + 2.0 * half[0]
        merged_lo = [lo[0]]
        merged_hi = [hi[0]]
        for a, b in zip(lo[1:], hi[1:]):
            if a <= merged_hi[-1]:
                merged_hi[-1] = max(merged_hi[-1], b)
            else:
                merged_lo.append(a)
                merged_hi.append(b)
        ml = np.asarray(merged_lo)
        mh = np.asarray(merged_hi)
        xs = pts[:, 0]
        idx = np.searchsorted(ml, xs, side="right") - 1
        covered = (idx >= 0) & (xs <= mh[np.clip(idx, 0, len(mh) - 1)])
    else:
        covered = np.zeros(pts.shape[0], dtype=bool)
        chunk = max(1, int(2_000_000 / max(1, cover.centers.shape[0])))
        for start in range(0, pts.shape[0], chunk):
            block = pts[start : start + chunk]
            inside = np.all(
                np.abs(block[:, None, :] - cover.centers[None, :, :]) <= half[None, None, :],
                axis=2,
            ).any(axis=1)
            covered[start : start + chunk] = inside
    if not covered.all():
        raise AuditError(
            f"recursive cover missed {int((~covered).sum())} avoidance nodes"
        )
    cover.audit_passed = True


@dataclass(frozen=True)
class SubCountCheck:
    certified_contained: int
    window_count: int
    rhs: float
    sigma: float
    passed: bool


def sub_count_check(
    x: LatticeBasis,
    frame: HorosphericalFrame,
    tess: TessellationSpec,
    t: float,
    eps: float,
    n_samples: int,
    rng,
    kappa: float = 1.0,
) -> SubCountCheck:
    """Checked instance of the translate sub-count inequality for the target
    O = {systole > eps}.

    Among the window family of translates, those whose whole translated box
    sits inside O are counted with a conservative certificate (center systole
    above eps times the displacement envelope e^(kappa r)); the count must
    dominate the nu-mass of the one-step stratum through the r/2-core, divided
    by the contracted box volume.  Certification can only undercount, so a
    pass is meaningful and a failure would be a real violation.
    """
    import math as _math

    from .targets import TargetSet, inner_core

    p = frame.p
    side = tess.side
    contraction = frame.contraction_rates(t)
    gt = frame.flow.matrix(t)
    pushed = _renorm(gt @ x.cols)
    axes = []
    for j in range(p):
        reach = side / 2.0 + side * contraction[j] / 2.0
        kmax = int(_math.floor(reach / (side * contraction[j]) + 1e-12))
        axes.append(side * np.arange(-kmax, kmax + 1))
    if p == 1:
        gammas = axes[0].reshape(-1, 1)
    else:
        grids = np.meshgrid(*axes, indexing="ij")
        gammas = np.stack([g.reshape(-1) for g in grids], axis=1)
    centers = _shear_apply_batch(frame, gammas, pushed)
    target = TargetSet.systole_above(eps)
    certified_target = TargetSet.systole_above(eps * _math.exp(kappa * tess.r))
    certified = int(certified_target.membership_batch(centers).sum())
    # rhs: nu(A^1 with the r/2-core) / nu(contracted box) = P_hat * e^(delta t)
    core = inner_core(target, tess.r / 2.0, kappa=kappa)
    coords = rng.uniform(-side / 2.0, side / 2.0, size=(int(n_samples), p))
    stratum = core.membership_batch(_shear_apply_batch(frame, coords, pushed))
    p_hat = float(stratum.mean())
    se = _math.sqrt(max(p_hat * (1 - p_hat), 1.0 / n_samples) / n_samples)
    scale = _math.exp(frame.delta * t)
    return SubCountCheck(
        certified_contained=certified,
        window_count=int(gammas.shape[0]),
        rhs=p_hat * scale,
        sigma=se * scale,
        passed=certified >= p_hat * scale - 3.0 * se * scale,
    )


# ---------------------------------------------------------------------------
# Cover-constant combination
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverConstants:
    """Inputs of the two-regime cover combination.

    The combination argument needs k2 >= 1 and the composite inner prefactor
    K = (1 + C0)(c2/c1)(theta/r + 8 sqrt(p))^p k1 >= 1 (k1 itself may be
    below one, as it is in the assembled window-ratio form); a1, a2 only need
    positivity.  These are the conditions the decomposition audit relies on.
    """

    k1: float
    a1: float
    k2: float
    a2: float
    C0: float
    c1: float = 1.0
    c2: float = 1.0
    p: int = 1
    theta: float = 0.1
    r: float = 0.1
    r_star: float = 0.2

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 < 1.0:
            raise PreconditionError("need k1 > 0 and k2 >= 1")
        if self.inner_prefactor < 1.0:
            raise PreconditionError(
                "composite inner prefactor (1+C0)(c2/c1)(theta/r+8 sqrt p)^p k1 "
                "must be >= 1"
            )
        if self.a1 <= 0 or self.a2 <= 0:
            raise PreconditionError("need a1, a2 > 0")
        if not (self.r <= self.theta <= self.r_star / 2.0 + 1e-15):
            raise PreconditionError("need theta in [r, r_star/2]")

    @property
    def inner_prefactor(self) -> float:
        geom = (self.c2 / self.c1) * (self.theta / self.r
                                      + 8.0 * math.sqrt(self.p)) ** self.p
        return (1.0 + self.C0) * geom * self.k1


def combine_cover_constants(cc: CoverConstants) -> tuple[float, float]:
    """k3 = (1 + C0)(c2/c1)(theta/r + 8 sqrt(p))^p k1 k2^2 and
    a3 = a1 + a2 + sqrt(k3 a2)."""
    geom = (cc.c2 / cc.c1) * (cc.theta / cc.r + 8.0 * math.sqrt(cc.p)) ** cc.p
    k3 = (1.0 + cc.C0) * geom * cc.k1 * cc.k2 ** 2
    a3 = cc.a1 + cc.a2 + math.sqrt(k3 * cc.a2)
    return k3, a3


@dataclass(frozen=True)
class AssembledConstants:
    """Measured-input assembly of the inner/cusp cover constants.

    k1/a1 come from the equidistribution cover (window-ratio prefactor and the
    per-step survival term); k2/a2 from the escape bound (height regularity
    over the window mass, and the contraction ratio).  C1 is the closed-form
    envelope with k3 <= C1^2/theta^(2p) and a3 bounded by the explicit
    three-term expression; both dominations are rechecked numerically and
    reported.
    """

    cc: CoverConstants
    k1_raw: float
    k3: float
    a3: float
    C1: float
    k3_upper: float
    a3_upper: float
    k3_dominated: bool
    a3_dominated: bool


def assemble_cover_constants(
    mu_sigma4theta_O: float,
    c: float,
    r: float,
    theta: float,
    p: int,
    k: int,
    t: float,
    lam: float,
    C_reg: float,
    c1: float = 1.0,
    c2: float = 1.0,
) -> AssembledConstants:
    from .heights import unit_ball_volume
    from .tessellation import covering_constant_c0, mixing_constant_c2

    C0 = covering_constant_c0(p, c1, c2)
    C2c = mixing_constant_c2(p, c1, c2)
    k1_raw = (c2 / c1) * (2.0 * r / theta) ** p
    a1 = 1.0 - mu_sigma4theta_O + (C2c / r ** p) * math.exp(-lam * k * t)
    nu_vtheta = (theta / (4.0 * math.sqrt(p))) ** p / unit_ball_volume(p)
    k2 = C_reg ** 4 / nu_vtheta
    a2 = 4.0 * c / (1.0 - c)
    cc = CoverConstants(k1=k1_raw, a1=a1, k2=max(k2, 1.0), a2=a2,
                        C0=C0, c1=c1, c2=c2, p=p, theta=theta, r=r)
    k3, a3 = combine_cover_constants(cc)
    # 1/nu(V_theta) carries the unit-ball volume of the chart (nu is the
    # uniform probability on the unit ball, c1 compares the chart to Lebesgue)
    C1 = (math.sqrt(1.0 + C0) * (c2 / c1) * (2.0 + 16.0 * math.sqrt(p)) ** (p / 2.0)
          * ((4.0 * math.sqrt(p)) ** p * unit_ball_volume(p) / c1) * C_reg ** 4)
    k3_upper = C1 ** 2 / theta ** (2 * p)
    a3_upper = a1 + a2 + (8.0 * C1 / theta ** p) * math.sqrt(c) / (1.0 - c)
    return AssembledConstants(
        cc=cc, k1_raw=k1_raw, k3=k3, a3=a3, C1=C1,
        k3_upper=k3_upper, a3_upper=a3_upper,
        k3_dominated=k3 <= k3_upper * (1.0 + 1e-12),
        a3_dominated=a3 <= a3_upper * (1.0 + 1e-12),
    )


def decomposition_audit(cc: CoverConstants, N: int) -> dict:
    """Exhaustive audit of the alternation decomposition for small N.

    Sums the per-subset claim bound k2^(d'+1) K^(d+1) a1^(|I|-d) a2^|J| over
    every subset of {1..N} and checks it against the closed form k3 a3^N (the
    common e^(delta N t) factor cancels).
    """
    if N > 16:
        raise BudgetError("decomposition audit enumerates 2^N subsets; N > 16 refused")
    from .combinatorics import _d_of_mask, _dprime_of_mask

    geom = (cc.c2 / cc.c1) * (cc.theta / cc.r + 8.0 * math.sqrt(cc.p)) ** cc.p
    K = (1.0 + cc.C0) * geom * cc.k1
    total = 0.0
    for mask in range(1 << N):
        j = mask.bit_count()
        d = _d_of_mask(mask, N)
        dp = _dprime_of_mask(mask, N)
        total += (cc.k2 ** (dp + 1)) * (K ** (d + 1)) * cc.a1 ** ((N - j) - d) * cc.a2 ** j
    k3, a3 = combine_cover_constants(cc)
    closed = k3 * a3 ** N
    return {"enumerated_total": total, "closed_form": closed, "passed": total <= closed}
