import json

import pytest
from fastapi.testclient import TestClient

from orbitgauge.cli import main
from orbitgauge.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


class TestService:
    def test_health(self, client):
        r = client.get("/v1/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"

    def test_selftest(self, client):
        r = client.post("/v1/selftest", json={})
        assert r.status_code == 200
        assert r.json()["summary"]["all_passed"]

    def test_bounds_exact_rational(self, client):
        r = client.post("/v1/bounds", json={"which": "s1", "lambda_max": 2.0,
                                            "k": 2, "t": 5.0, "c": "0.2"})
        body = r.json()
        assert body["summary"] == {"raw": 0.0, "clamped": 0.0}
        payload = json.loads(body["files"]["bounds.json"])
        assert payload["raw"] == 0.0

    def test_precondition_maps_to_422(self, client):
        r = client.post("/v1/tessellate", json={"m": 1, "n": 1, "r": 0.1,
                                                "t_grid": [0.4]})
        assert r.status_code == 422
        assert r.json()["kind"] == "precondition"

    def test_unknown_key_named(self, client):
        r = client.post("/v1/tessellate", json={"m": 1, "n": 1, "bogus_key": 3})
        assert r.status_code == 422
        assert "bogus_key" in json.dumps(r.json())

    def test_budget_maps_to_429(self, client):
        r = client.post("/v1/di-check", json={"m": 1, "n": 1, "c": 0.5,
                                              "n_lo": 2, "n_hi": 50_000})
        assert r.status_code == 429
        assert r.json()["kind"] == "budget"

    def test_manifest_carries_digests(self, client):
        r = client.post("/v1/bounds", json={"which": "final", "mu": 0.1,
                                            "lambda_max": 2.0, "k": 2, "t": 10.0})
        man = r.json()["manifest"]
        assert man["subcommand"] == "bounds"
        assert set(man["output_digests"]) == {"bounds.json"}
        assert man["version"]

    def test_csv_is_rfc4180(self, client):
        r = client.post("/v1/tessellate", json={"m": 1, "n": 1, "r": 0.1,
                                                "t_grid": [1.1, 2.0]})
        csv_text = r.json()["files"]["tessellate.csv"]
        lines = csv_text.split("\r\n")
        assert lines[0] == "t,exact_count,bound,pass"
        assert len(lines) == 4  # header + 2 rows + trailing newline


class TestCLI:
    def test_bounds_subcommand(self, tmp_path, capsys):
        out = tmp_path / "b"
        code = main(["bounds", "s1", "--lambda-max", "2", "--k", "2", "--t", "5",
                     "--c", "0.2", "--out", str(out)])
        assert code == 0
        payload = json.loads((out / "bounds.json").read_text())
        assert payload["raw"] == 0.0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["subcommand"] == "bounds"

    def test_exit_code_precondition(self, tmp_path):
        code = main(["tessellate", "--m", "1", "--n", "1", "--r", "0.1",
                     "--t", "0.4", "--out", str(tmp_path / "t")])
        assert code == 2

    def test_exit_code_budget(self, tmp_path):
        code = main(["di-check", "--m", "1", "--n", "1", "--c", "0.5",
                     "--N", "2:50000", "--Y", "[[0.3]]",
                     "--out", str(tmp_path / "d")])
        assert code == 3

    def test_rerun_reproduces(self, tmp_path):
        out = tmp_path / "m1"
        assert main(["margulis-check", "--m", "1", "--n", "1", "--s", "0.5",
                     "--t", "4", "--samples", "20000", "--seed", "99",
                     "--out", str(out)]) == 0
        rerun_out = tmp_path / "m2"
        assert main(["rerun", str(out / "manifest.json"),
                     "--out", str(rerun_out)]) == 0
        a = (out / "margulis_check.json").read_bytes()
        b = (rerun_out / "margulis_check.json").read_bytes()
        assert a == b

    def test_rerun_detects_tampering(self, tmp_path):
        out = tmp_path / "m1"
        assert main(["bounds", "final", "--mu", "0.1", "--lambda-max", "2",
                     "--k", "2", "--t", "10", "--out", str(out)]) == 0
        man = json.loads((out / "manifest.json").read_text())
        man["output_digests"]["bounds.json"] = "0" * 64
        (out / "manifest.json").write_text(json.dumps(man))
        assert main(["rerun", str(out / "manifest.json"),
                     "--out", str(tmp_path / "m2")]) == 4

    def test_config_file_with_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"m": 1, "n": 1, "r": 0.1, "t_grid": [1.2]}))
        out = tmp_path / "tc"
        code = main(["tessellate", "--config", str(cfg), "--t", "1.5,2.0",
                     "--out", str(out)])
        assert code == 0
        csv_text = (out / "tessellate.csv").read_text()
        assert "1.5," in csv_text and "1.2," not in csv_text

    def test_config_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"m": 1, "n": 1, "mystery": 7}))
        code = main(["tessellate", "--config", str(cfg),
                     "--out", str(tmp_path / "x")])
        assert code == 2

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ORBITGAUGE_SEED", "4242")
        out = tmp_path / "e"
        assert main(["margulis-check", "--t", "4", "--samples", "5000",
                     "--out", str(out)]) == 0
        man = json.loads((out / "manifest.json").read_text())
        assert man["seed"] == 4242

    def test_dimension_cantor(self, tmp_path):
        out = tmp_path / "dim"
        assert main(["dimension", "--set", "cantor", "--scales", "4:12",
                     "--depth", "10", "--out", str(out)]) == 0
        est = json.loads((out / "dimension.json").read_text())
        assert abs(est["slope"] - 0.6309) < 0.05

    def test_equidist_writes_fit(self, tmp_path):
        out = tmp_path / "eq"
        assert main(["equidist", "--target", "systole-below:0.1",
                     "--t-grid", "3:4.5:0.5", "--r", "0.1",
                     "--samples", "20000", "--seed", "7",
                     "--out", str(out)]) == 0
        assert (out / "equidist.csv").exists()
        assert (out / "decay_fit.json").exists()

    def test_equidist_documented_invocation(self, tmp_path):
        # the documented flag surface, scaled-down sample count; scientific
        # notation for --samples must parse
        out = tmp_path / "eqdoc"
        assert main(["equidist", "--target", "systole-below:0.1",
                     "--t-grid", "3:8:1", "--r", "0.1", "--samples", "5e4",
                     "--seed", "11", "--out", str(out)]) == 0
        csv_text = (out / "equidist.csv").read_bytes().decode()
        assert csv_text.startswith("t,error,sigma")
        assert len(csv_text.strip().split("\r\n")) == 7  # header + 6 grid rows

    def test_cover_subcommand(self, tmp_path):
        from orbitgauge.lattice import basis_from_tau

        basis = basis_from_tau(complex(0.21, 1.37))
        out = tmp_path / "cov"
        assert main(["cover", "--m", "1", "--n", "1", "--t", "2", "--N", "2",
                     "--r", "0.1", "--theta", "0.1",
                     "--target", "systole-above:0.2",
                     "--basis", json.dumps(basis.cols.tolist()),
                     "--audit-resolution", "2048",
                     "--out", str(out)]) == 0
        payload = json.loads((out / "cover.json").read_text())
        assert payload["audit_passed"]

    def test_di_scan_subcommand(self, tmp_path):
        out = tmp_path / "scan"
        assert main(["di-scan", "--c", "0.5", "--Nmax", "100", "--Nmin", "10",
                     "--grid-bits", "12", "--out", str(out)]) == 0
        payload = json.loads((out / "di_scan.json").read_text())
        assert payload["fraction"] < 0.5

    def test_no_orphan_outputs(self, tmp_path):
        # every written file is either declared in the manifest digests or is
        # the manifest itself
        out = tmp_path / "t"
        assert main(["tessellate", "--m", "1", "--n", "1", "--r", "0.1",
                     "--t", "1.2,1.8", "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        on_disk = {p.name for p in out.iterdir()}
        declared = set(manifest["output_digests"]) | {"manifest.json"}
        assert on_disk == declared

    def test_dimension_avoidance_spec_file(self, tmp_path):
        spec = {
            "m": 1, "n": 1, "t": 2.0, "n_steps": 2, "r": 0.1,
            "target": "systole-above:0.2", "resolution": 1 << 14,
        }
        spec_path = tmp_path / "avoidance-spec.json"
        spec_path.write_text(json.dumps(spec))
        out = tmp_path / "dim"
        assert main(["dimension", "--set", str(spec_path), "--scales", "3:8",
                     "--out", str(out)]) == 0
        est = json.loads((out / "dimension.json").read_text())
        assert est["horizon"]["set"] == "avoidance"

    def test_equidist_mlb_block(self, client):
        req = {"target": "systole-below:0.3", "t_grid": [3.0, 3.5, 4.0, 4.5],
               "r": 0.1, "samples": 50_000, "seed": 5,
               "mlb_target": "systole-above:0.5", "lambda_prime": 1.2}
        r = client.post("/v1/equidist", json=req)
        body = r.json()
        assert "measure_lower_bound.json" in body["files"]
        payload = json.loads(body["files"]["measure_lower_bound.json"])
        assert {"lhs", "rhs", "passed", "vacuous"} <= set(payload)

    def test_large_csv_digest_stable(self):
        from orbitgauge.manifest import digest, emit_csv

        rows = ((i, i * 0.1) for i in range(100_000))
        d1 = digest(emit_csv(["i", "x"], rows))
        rows = ((i, i * 0.1) for i in range(100_000))
        d2 = digest(emit_csv(["i", "x"], rows))
        assert d1 == d2

    def test_shard_count_reproducibility(self, client):
        # same (seed, shards) twice -> identical digests; shards is part of
        # the determinism contract and recorded in the manifest
        req = {"target": "systole-below:0.3", "t_grid": [3.0, 3.5, 4.0, 4.5],
               "r": 0.1, "samples": 20_000, "seed": 5, "shards": 3}
        r1 = client.post("/v1/equidist", json=req)
        r2 = client.post("/v1/equidist", json=req)
        assert r1.json()["manifest"]["output_digests"] == \
            r2.json()["manifest"]["output_digests"]
        assert r1.json()["manifest"]["shards"] == 3
