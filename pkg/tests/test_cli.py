import csv
import io
import json

import jsonschema
import numpy as np
import pytest

from ecoepi.cli import main
from ecoepi.equilibria import equilibrium_E4
from ecoepi.scenario import load_schema, load_scenario
from ecoepi.verify import run_checks


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def validate(doc, schema):
    jsonschema.Draft202012Validator(load_schema(schema)).validate(doc)


def write_scenario(tmp_path, **overrides):
    doc = {"name": "custom", "model": "harmless",
           "params": dict(r=.5, K=5, sigma=.5, mu=.4, q=.2, w=.5, m=.2, g=.1, f=.3)}
    for key, value in overrides.items():
        if key == "params":
            doc["params"].update(value)
        else:
            doc[key] = value
    path = tmp_path / "custom.json"
    path.write_text(json.dumps(doc, indent=2))
    return path


class TestEquilibria:
    def test_e3_scenario(self, capsys):
        code, out, err = run(capsys, "equilibria", "--scenario", "e3_scenario")
        assert code == 0
        doc = json.loads(out)
        validate(doc, "equilibria")
        status = {e["id"]: e["status"] for e in doc["equilibria"] if e["id"] != "E5"}
        assert status == {"E1": "feasible", "E2": "feasible", "E3": "feasible", "E4": "not_applicable"}
        validate(json.loads(err), "manifest")

    def test_toxic_labels(self, capsys):
        code, out, _ = run(capsys, "equilibria", "--scenario", "p2_scenario")
        assert code == 0
        assert {e["label"][0] for e in json.loads(out)["equilibria"]} == {"P"}

    def test_negative_capacity_names_key(self, capsys, tmp_path):
        path = write_scenario(tmp_path, params={"K": -1})
        code, out, err = run(capsys, "equilibria", "--scenario", str(path))
        assert code == 2 and out == ""
        assert "params.K" in err

    def test_unknown_key(self, capsys, tmp_path):
        path = write_scenario(tmp_path, extra=1)
        code, _, err = run(capsys, "equilibria", "--scenario", str(path))
        assert code == 2 and "extra" in err

    def test_missing_scenario(self, capsys):
        code, _, err = run(capsys, "equilibria")
        assert code == 2 and "--scenario" in err

    def test_unknown_bundled_name(self, capsys):
        code, *_ = run(capsys, "equilibria", "--scenario", "no_such_scenario")
        assert code == 2


class TestStability:
    @pytest.mark.parametrize("name,target", [("e1_scenario", "E1"), ("e3_scenario", "E3"), ("e4_scenario", "E4")])
    def test_target_stable(self, capsys, name, target):
        code, out, _ = run(capsys, "stability", "--scenario", name)
        assert code == 0
        doc = json.loads(out)
        validate(doc, "stability")
        (rec,) = [e for e in doc["equilibria"] if e["id"] == target]
        st = rec["stability"]
        assert st["classification"] == "stable" and st["agreement"]
        assert st["closed_form_agreement"] in (True, None)

    def test_hopf_point_marginal(self, capsys):
        code, out, _ = run(capsys, "stability", "--scenario", "e3_hopf_limit_cycle")
        doc = json.loads(out)
        (rec,) = [e for e in doc["equilibria"] if e["id"] == "E3"]
        assert rec["stability"]["classification"] == "marginal"
        assert doc["hopf_K"] == 12.0


class TestSimulate:
    def test_csv_and_manifest(self, capsys, tmp_path):
        out = tmp_path / "traj.csv"
        code, stdout, _ = run(capsys, "simulate", "--scenario", "e4_scenario", "--out", str(out))
        assert code == 0 and stdout == ""
        rows = list(csv.reader(io.StringIO(out.read_text())))
        assert rows[0] == ["t", "A", "T", "U", "S", "I", "P"]
        tail = np.array(rows[-1][1:4], dtype=float)
        target = equilibrium_E4(load_scenario("e4_scenario").params).coords
        np.testing.assert_allclose(tail, target, atol=1e-3)
        doc = json.loads((tmp_path / "traj.csv.manifest.json").read_text())
        validate(doc, "manifest")
        assert doc["termination"] == "completed" and doc["scenario_sha256"] == load_scenario("e4_scenario").digest
        assert doc["attractor"]["kind"] == "equilibrium"

    def test_disease_free_start(self, capsys, tmp_path):
        path = write_scenario(tmp_path, init={"A": 1.0, "T": 1.5, "U": 0.2})
        code, out, _ = run(capsys, "simulate", "--scenario", str(path), "--t-end", "50")
        assert code == 0
        col = [float(r["A"]) for r in csv.DictReader(io.StringIO(out))]
        assert all(a == 1.0 for a in col)

    def test_stride(self, capsys):
        code, out, _ = run(capsys, "simulate", "--scenario", "e3_scenario", "--t-end", "10", "--stride", "2.5")
        assert code == 0
        assert [r["t"] for r in csv.DictReader(io.StringIO(out))] == ["0", "2.5", "5", "7.5", "10"]

    @pytest.mark.parametrize("flag", ["--t-end", "--stride"])
    def test_nonpositive(self, capsys, flag):
        code, out, _ = run(capsys, "simulate", "--scenario", "e3_scenario", flag, "0")
        assert code == 2 and out == ""

    def test_limit_cycle_manifest(self, capsys):
        code, _, err = run(capsys, "simulate", "--scenario", "e3_hopf_limit_cycle")
        assert code == 0
        assert json.loads(err)["attractor"]["kind"] == "limit_cycle"


class TestSweep:
    def test_refine_table(self, capsys):
        code, out, err = run(capsys, "sweep", "--scenario", "e1_sigma_sweep", "--refine")
        assert code == 0
        grid, table = out.split("\n\n")
        rows = list(csv.DictReader(io.StringIO(grid)))
        assert list(rows[0])[:4] == ["sigma", "E1_feasible", "E1_stable", "E1_max_re"]
        assert len(rows) == 15
        refined = {r["transition"]: float(r["threshold"]) for r in csv.DictReader(io.StringIO(table))}
        assert refined["E1.stable"] == pytest.approx(0.4, rel=1e-5)
        assert refined["E2.feasible"] == pytest.approx(0.4, rel=1e-5)
        assert json.loads(err)["errored_rows"] == 0

    def test_scenario_without_sweep(self, capsys):
        code, *_ = run(capsys, "sweep", "--scenario", "e3_scenario")
        assert code == 2

    def test_workers(self, capsys):
        _, serial, _ = run(capsys, "sweep", "--scenario", "e1_sigma_sweep")
        _, parallel, _ = run(capsys, "sweep", "--scenario", "e1_sigma_sweep", "--workers", "2")
        assert serial == parallel


class TestVerify:
    def test_passes(self, capsys):
        code, out, err = run(capsys, "verify")
        assert code == 0
        doc = json.loads(out)
        validate(doc, "verify")
        assert doc["passed"] and len(doc["checks"]) == 7
        assert json.loads(err)["scenario"] is None

    def test_deterministic(self):
        assert run_checks().to_dict(timing=False) == run_checks().to_dict(timing=False)

    def test_detects_corrupted_jacobian(self):
        from ecoepi.model import jacobian_entries

        def broken(p, A, T, U):
            J = jacobian_entries(p, A, T, U)
            J[1, 2] *= 1.001
            return J

        report = run_checks(jacobian=broken)
        failed = {c.name for c in report.checks if not c.passed}
        assert failed == {"jacobian_fd"} and not report.passed
