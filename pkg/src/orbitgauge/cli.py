"""Reproducible command-line front end.

The CLI is a thin client of the service layer: flags are marshalled into the
request model of the subcommand, posted to the FastAPI app (in-process ASGI
transport by default, a remote server with --server), and the returned files
are written verbatim together with the run manifest.  Exit codes: 0 success,
2 precondition error, 3 budget refusal, 4 invariant/audit failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from .errors import OrbitgaugeError, PreconditionError
from .rng import resolve_seed


def _parse_grid(spec: str) -> list[float]:
    """'a:b:step' inclusive ranges or comma-separated values."""
    if ":" in spec:
        parts = [float(v) for v in spec.split(":")]
        if len(parts) == 2:
            lo, hi, step = parts[0], parts[1], 1.0
        else:
            lo, hi, step = parts
        out = []
        v = lo
        while v <= hi + 1e-12:
            out.append(round(v, 12))
            v += step
        return out
    return [float(v) for v in spec.split(",")]


def _parse_scales(spec: str) -> list[int]:
    if ":" in spec:
        lo, hi = (int(v) for v in spec.split(":"))
        return list(range(lo, hi + 1))
    return [int(v) for v in spec.split(",")]


def _parse_matrix_arg(spec: str):
    if spec.startswith("@"):
        return json.loads(Path(spec[1:]).read_text())
    return json.loads(spec)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    obj = json.loads(Path(path).read_text())
    if not isinstance(obj, dict):
        raise PreconditionError("config file must hold a JSON object")
    return obj


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orbitgauge")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--samples", type=float, default=None)
        p.add_argument("--shards", type=int, default=None)
        p.add_argument("--config", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--server", default=None, help="remote service URL")

    p = sub.add_parser("systole")
    common(p)
    p.add_argument("--basis", default=None, help="JSON matrix or @file.json")
    p.add_argument("--norm", default=None, choices=["euclidean", "supremum"])

    p = sub.add_parser("tessellate")
    common(p)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--t", default=None, help="grid a:b:step or comma list")
    p.add_argument("--exponents", default=None, help="comma list, block-sorted")

    p = sub.add_parser("margulis-check")
    common(p)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--panel-u", default=None, help="comma list of height values")

    p = sub.add_parser("escape-bound")
    common(p)
    for flag, typ in [("--m", int), ("--n", int), ("--s", float), ("--t", float),
                      ("--k", int), ("--N-max", int), ("--theta", float),
                      ("--c", float), ("--d", float)]:
        p.add_argument(flag, type=typ, default=None)

    p = sub.add_parser("equidist")
    common(p)
    p.add_argument("--target", default=None)
    p.add_argument("--t-grid", default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--basis", default=None)
    p.add_argument("--lambda-prime", type=float, default=None)
    p.add_argument("--mlb-target", default=None)

    p = sub.add_parser("cover")
    common(p)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--target", default=None, help="stay-in target set")
    p.add_argument("--basis", default=None)
    p.add_argument("--audit-resolution", type=int, default=None)
    p.add_argument("--mu-sigma-r", type=float, default=None)
    p.add_argument("--lambda-hat", type=float, default=None)

    p = sub.add_parser("dimension")
    common(p)
    p.add_argument("--set", dest="set_spec", default=None,
                   help="cantor | cf-bounded:B | avoidance-spec.json")
    p.add_argument("--scales", default=None, help="lo:hi or comma list")
    p.add_argument("--depth", type=int, default=None)

    p = sub.add_parser("bounds")
    common(p)
    p.add_argument("which", choices=["s1", "s2", "final"])
    p.add_argument("--lambda-max", type=float, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--c", default=None, help="float or exact num/den")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--C1", dest="c1", type=float, default=None)
    p.add_argument("--C2", dest="c2_const", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)

    p = sub.add_parser("di-check")
    common(p)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--N", default=None, help="lo:hi")
    p.add_argument("--Y", default=None, help="JSON matrix or @file.json")
    p.add_argument("--Y2", default=None)
    p.add_argument("--Y3", default=None)

    p = sub.add_parser("di-scan")
    common(p)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--Nmax", type=int, default=None)
    p.add_argument("--Nmin", type=int, default=None)
    p.add_argument("--grid-bits", type=int, default=None)
    p.add_argument("--k", type=int, default=None)

    p = sub.add_parser("selftest")
    common(p)

    p = sub.add_parser("rerun")
    p.add_argument("manifest", help="path to a manifest.json")
    p.add_argument("--out", default=None)
    p.add_argument("--server", default=None)

    p = sub.add_parser("serve")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8137)

    return ap


def _payload_from_args(args: argparse.Namespace) -> dict:
    """Config file first, explicit CLI flags override, model defaults fill in."""
    cfg = _load_config(args.config)
    payload = dict(cfg)

    def put(key, value):
        if value is not None:
            payload[key] = value

    put("seed", args.seed if args.seed is not None else
        (None if "seed" in cfg else resolve_seed(None)))
    if args.samples is not None:
        payload["samples"] = int(args.samples)
    put("shards", args.shards)
    sc = args.subcommand
    if sc == "systole":
        if args.basis is not None:
            payload["basis"] = _parse_matrix_arg(args.basis)
        put("norm", args.norm)
    elif sc == "tessellate":
        put("m", args.m)
        put("n", args.n)
        put("r", args.r)
        if args.t is not None:
            payload["t_grid"] = _parse_grid(args.t)
        if args.exponents is not None:
            payload["exponents"] = [float(v) for v in args.exponents.split(",")]
    elif sc == "margulis-check":
        put("m", args.m)
        put("n", args.n)
        put("s", args.s)
        put("t", args.t)
        if args.panel_u is not None:
            payload["panel_u"] = [float(v) for v in args.panel_u.split(",")]
    elif sc == "escape-bound":
        for key, val in [("m", args.m), ("n", args.n), ("s", args.s), ("t", args.t),
                         ("k", args.k), ("n_max", args.N_max), ("theta", args.theta),
                         ("c", args.c), ("d", args.d)]:
            put(key, val)
    elif sc == "equidist":
        put("target", args.target)
        if args.t_grid is not None:
            payload["t_grid"] = _parse_grid(args.t_grid)
        put("r", args.r)
        if args.basis is not None:
            payload["basis"] = _parse_matrix_arg(args.basis)
        put("lambda_prime", args.lambda_prime)
        put("mlb_target", args.mlb_target)
    elif sc == "cover":
        for key, val in [("m", args.m), ("n", args.n), ("t", args.t),
                         ("n_steps", args.N), ("r", args.r), ("theta", args.theta),
                         ("target", args.target),
                         ("audit_resolution", args.audit_resolution),
                         ("mu_sigma_r", args.mu_sigma_r),
                         ("lambda_hat", args.lambda_hat)]:
            put(key, val)
        if args.basis is not None:
            payload["basis"] = _parse_matrix_arg(args.basis)
    elif sc == "dimension":
        if args.set_spec is not None:
            if args.set_spec.endswith(".json"):
                payload["set_spec"] = "avoidance"
                payload["avoidance"] = json.loads(Path(args.set_spec).read_text())
            else:
                payload["set_spec"] = args.set_spec
        if args.scales is not None:
            payload["scales"] = _parse_scales(args.scales)
        put("depth", args.depth)
    elif sc == "bounds":
        payload["which"] = args.which
        for key, val in [("lambda_max", args.lambda_max), ("k", args.k), ("t", args.t),
                         ("mu", args.mu), ("c1", args.c1), ("c2_const", args.c2_const),
                         ("theta", args.theta), ("p", args.p), ("r", args.r),
                         ("lam", args.lam)]:
            put(key, val)
        if args.c is not None:
            payload["c"] = str(args.c)
    elif sc == "di-check":
        put("m", args.m)
        put("n", args.n)
        put("c", args.c)
        if args.N is not None:
            lo, hi = (int(v) for v in args.N.split(":"))
            payload["n_lo"], payload["n_hi"] = lo, hi
        mats = []
        for raw in [args.Y, args.Y2, args.Y3]:
            if raw is not None:
                mat = _parse_matrix_arg(raw)
                if not isinstance(mat[0], list):
                    mat = [mat]
                mats.append(mat)
        if mats:
            payload["matrices"] = mats
    elif sc == "di-scan":
        for key, val in [("c", args.c), ("n_max", args.Nmax), ("n_min", args.Nmin),
                         ("grid_bits", args.grid_bits), ("k", args.k)]:
            put(key, val)
    payload = {k: v for k, v in payload.items() if v is not None}
    return payload


def post_request(name: str, payload: dict, server: str | None) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.post(f"/v1/{name}", json=payload)

    async def go():
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://orbitgauge.local", timeout=None
        ) as client:
            return await client.post(f"/v1/{name}", json=payload)

    return asyncio.run(go())


def _write_outputs(out_dir: Path, files: dict, manifest: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text)
    from .manifest import emit_json

    (out_dir / "manifest.json").write_text(emit_json(manifest))


def _exit_code_for(resp: httpx.Response) -> int:
    if resp.status_code == 422:
        return 2
    if resp.status_code == 429:
        return 3
    try:
        kind = resp.json().get("kind")
    except Exception:
        kind = None
    if kind == "audit":
        return 4
    if kind == "budget":
        return 3
    if kind == "precondition":
        return 2
    return 1


def _run_subcommand(args: argparse.Namespace) -> int:
    payload = _payload_from_args(args)
    resp = post_request(args.subcommand, payload, args.server)
    if resp.status_code != 200:
        sys.stderr.write(f"error: {resp.text}\n")
        return _exit_code_for(resp)
    body = resp.json()
    out_dir = Path(args.out or f"orbitgauge_out/{args.subcommand}")
    _write_outputs(out_dir, body["files"], body["manifest"])
    for key, val in body["summary"].items():
        print(f"{key}: {val}")
    print(f"outputs written to {out_dir}")
    return 0


def _run_rerun(args: argparse.Namespace) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    name = manifest["subcommand"]
    resp = post_request(name, manifest["params"], args.server)
    if resp.status_code != 200:
        sys.stderr.write(f"error: {resp.text}\n")
        return _exit_code_for(resp)
    body = resp.json()
    out_dir = Path(args.out or (Path(args.manifest).parent / "rerun"))
    _write_outputs(out_dir, body["files"], body["manifest"])
    old = manifest.get("output_digests", {})
    new = body["manifest"]["output_digests"]
    if old and old != new:
        sys.stderr.write(f"digest mismatch: expected {old}, got {new}\n")
        return 4
    print(f"rerun reproduced {len(new)} outputs byte-identically in {out_dir}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.subcommand == "serve":
            import uvicorn

            from .service.app import app

            uvicorn.run(app, host=args.host, port=args.port)
            return 0
        if args.subcommand == "rerun":
            return _run_rerun(args)
        return _run_subcommand(args)
    except OrbitgaugeError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
