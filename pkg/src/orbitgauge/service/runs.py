"""Subcommand implementations shared by the service endpoints and the CLI.

Each runner consumes a validated request model and returns (summary, files,
manifest); files are rendered text (CSV/JSON) so clients write them verbatim,
which is what makes the byte-reproducibility contract checkable end to end.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .. import bounds as bounds_mod
from .. import combinatorics, convolution, dimension, diophantine, equidist, heights
from ..covers import AvoidanceQuery, recursive_cover, sample_avoidance_set
from ..errors import AuditError, PreconditionError
from ..flows import FlowSpec, horospherical_frame
from ..lattice import LatticeBasis, shortest_vector
from ..manifest import ExperimentManifest, RunTimer, digest, emit_csv, emit_json
from ..rng import shard_sizes, substreams
from ..targets import measure_of_target, parse_target
from ..tessellation import (
    TessellationSpec,
    bigt_threshold,
    count_intersecting_translates,
    cover_bowen_by_balls,
    cover_V_theta_by_V_r,
    mixing_constant_c2,
    tiling_check,
)
from . import models


def _bundle(name: str, req, files: dict[str, str], summary: dict, elapsed: float):
    manifest = ExperimentManifest(
        subcommand=name,
        params=req.model_dump(),
        seed=req.seed,
        shards=req.shards,
        wall_clock_s=elapsed,
        output_digests={k: digest(v) for k, v in sorted(files.items())},
    )
    return summary, files, manifest


def _flow_frame(m: int, n: int, exponents=None):
    flow = FlowSpec(tuple(exponents)) if exponents else FlowSpec.standard(m, n)
    return flow, horospherical_frame(flow, m, n)


def _basis(obj) -> LatticeBasis:
    if obj is None:
        return LatticeBasis.standard(2)
    return LatticeBasis(np.asarray(obj, dtype=float))


def _pooled_fraction(eval_hits, n_total: int, streams) -> tuple[float, float]:
    """Fixed-order sharded binomial estimate: eval_hits(rng, m) -> hit count."""
    sizes = shard_sizes(n_total, len(streams))
    hits = 0
    for rng, m in zip(streams, sizes):
        if m > 0:
            hits += int(eval_hits(rng, m))
    frac = hits / n_total
    if hits in (0, n_total):
        return frac, 1.0 / n_total
    return frac, math.sqrt(frac * (1.0 - frac) / n_total)


def run_systole(req: models.SystoleRequest):
    with RunTimer() as tm:
        res = shortest_vector(_basis(req.basis), req.norm)
        payload = {
            "vector": list(res.vector),
            "embedded": res.embedded.tolist(),
            "norm": res.norm,
            "norm_kind": res.norm_kind,
            "enumeration_radius": res.enumeration_radius,
        }
        files = {"systole.json": emit_json(payload)}
    return _bundle("systole", req, files, {"norm": res.norm}, tm.elapsed)


def run_tessellate(req: models.TessellateRequest):
    with RunTimer() as tm:
        flow, frame = _flow_frame(req.m, req.n, req.exponents)
        tess = TessellationSpec(p=frame.p, r=req.r)
        tmin = bigt_threshold(frame)
        bad = [t for t in req.t_grid if t < tmin]
        if bad:
            raise PreconditionError(
                f"t values {bad} are below the admissible threshold {tmin:.6f}"
            )
        rows = []
        all_pass = True
        for t in req.t_grid:
            rep = count_intersecting_translates(frame, tess, t)
            rows.append((t, rep.exact_count, rep.bound, rep.passed))
            all_pass &= rep.passed
        files = {"tessellate.csv": emit_csv(["t", "exact_count", "bound", "pass"], rows)}
    return _bundle("tessellate", req, files, {"all_passed": all_pass}, tm.elapsed)


def run_margulis(req: models.MargulisRequest):
    with RunTimer() as tm:
        flow, frame = _flow_frame(req.m, req.n)
        height = heights.HeightFunctionSpec(s=req.s)
        panel = [height.panel_point(u) for u in req.panel_u]
        rng = substreams(req.seed, req.shards)[0]
        report = heights.margulis_check(
            height, flow, frame, req.t, panel, req.samples, rng
        )
        files = {"margulis_check.json": emit_json(report.to_json_obj())}
    return _bundle(
        "margulis-check", req, files,
        {"c_hat": report.c_hat, "d_hat": report.d_hat, "passed": report.passed},
        tm.elapsed,
    )


def run_escape_bound(req: models.EscapeBoundRequest):
    with RunTimer() as tm:
        flow, frame = _flow_frame(req.m, req.n)
        height = heights.HeightFunctionSpec(s=req.s)
        x = LatticeBasis.standard(flow.dim)
        alpha = height.expansion_rate(flow)
        rng = substreams(req.seed, req.shards)[0]
        rows = []
        all_pass = True
        for N in range(1, req.n_max + 1):
            inp = heights.EscapeBoundInput(
                c=req.c, d=req.d, alpha=alpha, t=req.t,
                C=height.regularity_constant, N=N, k=req.k, u_x=height.value(x),
            )
            ver = heights.verify_escape_mass(
                height, frame, inp, req.theta, x, req.samples, rng
            )
            rows.append((N, ver.bound, ver.lhs, ver.sigma))
            all_pass &= ver.passed
        files = {"escape_bound.csv": emit_csv(["N", "bound", "mc_estimate", "sigma"], rows)}
    return _bundle("escape-bound", req, files, {"all_passed": all_pass}, tm.elapsed)


def run_equidist(req: models.EquidistRequest):
    with RunTimer() as tm:
        target = parse_target(req.target)
        flow, frame = _flow_frame(1, 1)
        x = _basis(req.basis)
        streams = substreams(req.seed, max(req.shards, 1) + 1)
        mu_rng = streams[-1]
        mu = measure_of_target(target, req.samples, mu_rng)
        t_grid = sorted(float(t) for t in req.t_grid)
        onset = equidist.mixing_onset(x)
        if t_grid[0] < onset:
            raise PreconditionError(
                f"grid starts below the mixing onset {onset:.3f} for this base point"
            )
        errors, floors, rows = [], [], []
        for t in t_grid:
            def hits(rng, mcount, t=t):
                frac, _ = equidist.window_fraction(
                    x, frame, t, target, req.r, mcount, rng
                )
                return round(frac * mcount)

            frac, se = _pooled_fraction(hits, req.samples, streams[:-1])
            err = abs(frac - mu.value)
            sig = math.sqrt(se ** 2 + mu.std_error ** 2)
            errors.append(err)
            floors.append(sig)
            rows.append((t, err, sig))
        fit = equidist.fit_exponential_decay(t_grid, errors, floors)
        files = {
            "equidist.csv": emit_csv(["t", "error", "sigma"], rows),
            "decay_fit.json": emit_json(fit.to_json_obj()),
        }
        summary = {
            "lambda_hat": fit.lambda_hat,
            "conclusive": fit.conclusive,
            "positive_at_95": fit.positive_at_95,
        }
        lam = req.lambda_prime if req.lambda_prime is not None else fit.lambda_hat
        if req.mlb_target is not None and lam is not None:
            mlb = equidist.measure_lower_bound_check(
                x, flow, frame, t_grid[-1], parse_target(req.mlb_target),
                req.r, lam, req.samples, streams[0],
            )
            files["measure_lower_bound.json"] = emit_json(mlb.to_json_obj())
            summary["mlb_passed"] = mlb.passed
            summary["mlb_vacuous"] = mlb.vacuous
    return _bundle("equidist", req, files, summary, tm.elapsed)


def run_cover(req: models.CoverRequest):
    with RunTimer() as tm:
        flow, frame = _flow_frame(req.m, req.n)
        target = parse_target(req.target)
        query = AvoidanceQuery(
            x=_basis(req.basis), flow=flow, frame=frame, t=req.t, r=req.r,
            target=target, N=req.n_steps,
        )
        cover = recursive_cover(
            query, req.theta, audit_resolution=req.audit_resolution,
            mu_sigma_r_O=req.mu_sigma_r, lambda_hat=req.lambda_hat,
        )
        rows = []
        for lvl, count in enumerate(cover.level_counts, start=1):
            if req.mu_sigma_r is not None and req.lambda_hat is not None:
                per = (1.0 - req.mu_sigma_r
                       + mixing_constant_c2(frame.p) * req.r ** (-frame.p)
                       * math.exp(-req.lambda_hat * req.t))
                level_bound = math.exp(frame.delta * lvl * req.t) * per ** lvl
            else:
                level_bound = float("nan")
            rows.append((lvl, count, level_bound))
        files = {
            "cover.json": emit_json(cover.to_json_obj()),
            "cover.csv": emit_csv(["level", "count", "bound"], rows),
        }
        summary = {
            "count": cover.count,
            "audit_passed": cover.audit_passed,
            "bound": cover.bound,
        }
    return _bundle("cover", req, files, summary, tm.elapsed)


def run_dimension(req: models.DimensionRequest):
    with RunTimer() as tm:
        spec = req.set_spec
        horizon = None
        if spec == "cantor":
            source = dimension.cantor_intervals(req.depth)
            horizon = {"set": "cantor", "depth": req.depth}
        elif spec.startswith("cf-bounded:"):
            bound = int(spec.split(":")[1])
            source = dimension.cf_bounded_intervals(bound, req.depth)
            horizon = {"set": f"cf-bounded:{bound}", "depth": req.depth}
        elif spec == "avoidance":
            if not req.avoidance:
                raise PreconditionError("avoidance spec requires the avoidance block")
            a = dict(req.avoidance)
            flow, frame = _flow_frame(int(a.get("m", 1)), int(a.get("n", 1)))
            query = AvoidanceQuery(
                x=_basis(a.get("basis")), flow=flow, frame=frame,
                t=float(a["t"]), r=float(a.get("r", 0.1)),
                target=parse_target(a["target"]), N=int(a["n_steps"]),
            )
            source = sample_avoidance_set(query, int(a.get("resolution", 1 << 18)))
            horizon = {"set": "avoidance", **{k: a[k] for k in sorted(a)}}
        else:
            raise PreconditionError(f"unknown set spec {spec!r}")
        est = dimension.box_count_dimension(source, req.scales, horizon=horizon)
        rows = list(zip(est.scales_log_inv, est.counts_log))
        files = {
            "dimension.csv": emit_csv(["log_inv_delta", "log_count"], rows),
            "dimension.json": emit_json(est.to_json_obj()),
        }
    return _bundle(
        "dimension", req, files,
        {"slope": est.slope, "ci95": list(est.ci95)}, tm.elapsed,
    )


def run_bounds(req: models.BoundsRequest):
    with RunTimer() as tm:
        cf = Fraction(req.c)
        if req.which == "s1":
            val = bounds_mod.codim_bound_S1(req.lambda_max, req.k, req.t, cf)
        elif req.which == "s2":
            val = bounds_mod.codim_bound_S2(
                req.mu, req.c1, req.theta, req.p, float(cf), req.c2_const,
                req.r, req.lam, req.k, req.t, req.lambda_max,
            )
        elif req.which == "final":
            val = bounds_mod.final_codim(req.mu, req.lambda_max, req.k, req.t)
        else:
            raise PreconditionError(f"unknown bound {req.which!r}")
        payload = val.to_json_obj()
        payload["which"] = req.which
        files = {"bounds.json": emit_json(payload)}
    return _bundle("bounds", req, files, {"raw": val.raw, "clamped": val.clamped}, tm.elapsed)


def run_di_check(req: models.DICheckRequest):
    with RunTimer() as tm:
        mats = [diophantine.parse_matrix(mat, req.m, req.n) for mat in req.matrices]
        query = diophantine.DIQuery(
            m=req.m, n=req.n, Y_list=mats, c=req.c, N_range=(req.n_lo, req.n_hi)
        )
        res = diophantine.is_jointly_di(query)
        files = {"di_check.json": emit_json(res.to_json_obj())}
    return _bundle(
        "di-check", req, files,
        {"all_improvable": res.all_improvable, "first_failure_N": res.first_failure_N},
        tm.elapsed,
    )


def run_di_scan(req: models.DIScanRequest):
    with RunTimer() as tm:
        scan = diophantine.di_dimension_scan(
            req.c, 1, 1, req.k, req.n_max, req.grid_bits, N_min=req.n_min
        )
        # dimension trend across nested horizons (expected non-increasing);
        # reported as data, never as a limit claim
        trend = []
        horizon = req.n_min + 10
        while horizon < req.n_max:
            partial = diophantine.di_dimension_scan(
                req.c, 1, 1, req.k, horizon, req.grid_bits, N_min=req.n_min
            )
            trend.append({"N_max": horizon, "slope": partial.estimate.slope,
                          "fraction": partial.fraction})
            horizon *= 10
        trend.append({"N_max": req.n_max, "slope": scan.estimate.slope,
                      "fraction": scan.fraction})
        flat = scan.survivors.reshape(-1)
        rows = ((i, bool(v)) for i, v in enumerate(flat))
        files = {
            "di_scan.csv": emit_csv(["grid_cell", "survives"], rows),
            "di_scan.json": emit_json(
                {
                    "fraction": scan.fraction,
                    "estimate": scan.estimate.to_json_obj(),
                    "trend": trend,
                    "N_min": scan.N_min,
                    "N_max": scan.N_max,
                    "grid_bits": scan.grid_bits,
                }
            ),
        }
    return _bundle(
        "di-scan", req, files,
        {"fraction": scan.fraction, "slope": scan.estimate.slope}, tm.elapsed,
    )


def run_selftest(req: models.SelftestRequest):
    """Deterministic exact-oracle suites; any failure is an audit error."""
    with RunTimer() as tm:
        rng = np.random.default_rng(12345)
        checks = []

        def check(name, ok):
            checks.append({"name": name, "passed": bool(ok)})

        lhs, rhs, ok = combinatorics.subset_sum_bound(1.0, 1.0, 1.0, 2)
        check("subset_sum_N2_unit", ok and lhs == 4 and rhs == 9)
        ok_all = True
        for _ in range(100):
            n1, n2, n3 = np.exp(rng.uniform(-2, 2, size=3))
            _, _, ok = combinatorics.subset_sum_bound(float(n1), float(n2), float(n3), 8)
            ok_all &= ok
        check("subset_sum_random_N8", ok_all)
        check("d_counts_examples",
              combinatorics.d_counts(set(), 4) == (0, 0)
              and combinatorics.d_counts({1, 2, 3, 4}, 4) == (0, 0)
              and combinatorics.d_counts({2, 3}, 4) == (1, 1))
        check("dprime_exhaustive_N12", combinatorics.exhaustive_dprime_check(12))
        t1 = tiling_check(TessellationSpec(p=1, r=0.1))
        t2 = tiling_check(TessellationSpec(p=2, r=0.1))
        check("tiling_p1", t1["max_defect"] <= 1e-12)
        check("tiling_p2", t2["max_defect"] <= 1e-12)
        dens_ok = all(
            convolution.convolution_density_check(2.0, 1.0, n).exactly_one
            for n in range(1, 6)
        )
        check("convolution_density_exact", dens_ok)
        flow, frame = _flow_frame(1, 1)
        tess = TessellationSpec(p=1, r=0.05)
        check("cover_theta_aligned",
              cover_V_theta_by_V_r(tess, 0.05).exact_count == 1)
        check("bowen_isotropic_one_ball",
              cover_bowen_by_balls(frame, 2.0, 0.1).centers.shape[0] == 1)
        all_passed = all(c["passed"] for c in checks)
        files = {"selftest.json": emit_json({"checks": checks, "all_passed": all_passed})}
        if not all_passed:
            raise AuditError("selftest failed: " + ", ".join(
                c["name"] for c in checks if not c["passed"]
            ))
    return _bundle("selftest", req, files, {"all_passed": all_passed}, tm.elapsed)


RUNNERS = {
    "systole": (models.SystoleRequest, run_systole),
    "tessellate": (models.TessellateRequest, run_tessellate),
    "margulis-check": (models.MargulisRequest, run_margulis),
    "escape-bound": (models.EscapeBoundRequest, run_escape_bound),
    "equidist": (models.EquidistRequest, run_equidist),
    "cover": (models.CoverRequest, run_cover),
    "dimension": (models.DimensionRequest, run_dimension),
    "bounds": (models.BoundsRequest, run_bounds),
    "di-check": (models.DICheckRequest, run_di_check),
    "di-scan": (models.DIScanRequest, run_di_scan),
    "selftest": (models.SelftestRequest, run_selftest),
}
