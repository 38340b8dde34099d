import csv
import io
import json
import math
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from conftest import DATA
from gwi.cli import main

SCHEMAS = {p.name[:-5]: json.loads(p.read_text()) for p in resources.files("gwi").joinpath("schemas").iterdir()
           if p.name.endswith(".json")}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, schema, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    data = json.loads(out)
    jsonschema.validate(data, SCHEMAS[schema])
    return data["outputs"]


def test_schemas_are_valid_documents():
    assert set(SCHEMAS) == {"evaluate", "optimize", "visibility", "lhv_bound", "lhv_identity", "lhv_jpd", "reproduce"}
    for schema in SCHEMAS.values():
        jsonschema.Draft202012Validator.check_schema(schema)


class TestEvaluate:
    def test_ghz_quoted_point(self, capsys):
        out = report(capsys, "evaluate", "evaluate", "--state", "ghz", "--n", "4", "--plane", "xy",
                     "--ghz-reduced", "0.6981", "2.2427")
        assert out["violated"] and out["bound"] == 4
        assert out["value"] == pytest.approx(5.656050, abs=1e-6)

    def test_maximally_mixed(self, capsys):
        out = report(capsys, "evaluate", "evaluate", "--state", "mixed:0", "--n", "4", "--angles", *["0.3"] * 8)
        assert out["value"] == pytest.approx(0.0, abs=1e-12) and not out["violated"]

    def test_w_tuple(self, capsys):
        out = report(capsys, "evaluate", "evaluate", "--state", "w", "--n", "4", "--plane", "xz",
                     "--w-reduced", "2.271", "0.131", "2.298", "-2.557", "-0.892")
        assert out["value"] == pytest.approx(6.5603, abs=1e-3)

    def test_w_flat_angles_agree_with_reduced(self, capsys):
        flat = ["0", "2.271", "0.131", "2.298", "-2.557", "-0.892", "0.131", "2.298"]
        out = report(capsys, "evaluate", "evaluate", "--state", "w", "--angles", *flat)
        assert out["value"] == pytest.approx(6.560281862621316, abs=1e-9)

    def test_degrees(self, capsys):
        rad = report(capsys, "evaluate", "evaluate", "--state", "singlet", "--angles", "0", "1.5707963267948966",
                     "0.7853981633974483", "-0.7853981633974483")
        deg = report(capsys, "evaluate", "evaluate", "--state", "singlet", "--degrees", "--angles", "0", "90", "45", "-45")
        assert rad["value"] == pytest.approx(deg["value"], abs=1e-12)

    def test_probability_form(self, capsys):
        out = report(capsys, "evaluate", "evaluate", "--state", "singlet", "--form", "probability",
                     "--angles", "0", "1.5707963267948966", "0.7853981633974483", "-0.7853981633974483")
        assert out["bound"] == 0 and out["expression"].startswith("p(a1+,a2+)")

    def test_settings_file(self, capsys, tmp_path):
        f = tmp_path / "s.json"
        f.write_text(json.dumps({"plane": "XZ", "pairs": [[0, 90], [45, -45]]}))
        a = report(capsys, "evaluate", "evaluate", "--state", "singlet", "--settings", str(f), "--degrees")
        f.write_text(json.dumps({"bloch_pairs": [[[0, 0, 1], [1, 0, 0]],
                                                 [[math.sqrt(0.5), 0, math.sqrt(0.5)], [-math.sqrt(0.5), 0, math.sqrt(0.5)]]]}))
        b = report(capsys, "evaluate", "evaluate", "--state", "singlet", "--settings", str(f))
        assert a["value"] == pytest.approx(b["value"], abs=1e-12)

    def test_state_file(self, capsys, tmp_path):
        f = tmp_path / "psi.json"
        f.write_text(json.dumps({"amplitudes": [0, [0.7071067811865476, 0], [-0.7071067811865476, 0], 0]}))
        out = report(capsys, "evaluate", "evaluate", "--state", f"file:{f}", "--angles", "0", "1", "2", "3")
        ref = report(capsys, "evaluate", "evaluate", "--state", "singlet", "--angles", "0", "1", "2", "3")
        assert out["value"] == pytest.approx(ref["value"], abs=1e-12)

    def test_wigner(self, capsys):
        out = report(capsys, "evaluate", "evaluate", "--state", "singlet", "--expr", "wigner", "--form", "probability",
                     "--angles", "0", "1.2", "0.6")
        assert out["value"] == pytest.approx(0.5 * (math.sin(0.6) ** 2 - 2 * math.sin(0.3) ** 2), abs=1e-12)

    def test_arity_mismatch_exits_65(self, capsys):
        code, _, err = run(capsys, "evaluate", "--state", "ghz", "--n", "4", "--angles", "0", "1", "2", "3")
        assert code == 65 and "parties" in err

    def test_missing_settings_exit_64(self, capsys):
        code, _, err = run(capsys, "evaluate", "--state", "ghz")
        assert code == 64 and "usage" in err

    def test_unknown_flag_exit_64(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["evaluate", "--bogus"])
        assert exc.value.code == 64

    @pytest.mark.parametrize("state", ["w:1.5", "nonsense"])
    def test_bad_state(self, capsys, state):
        code, _, _ = run(capsys, "evaluate", "--state", state, "--angles", *["0"] * 8)
        assert code in (64, 65)


class TestOptimize:
    def test_ghz_reduced(self, capsys):
        out = report(capsys, "optimize", "optimize", "--objective", "ghz-reduced", "--restarts", "64", "--seed", "7")
        assert out["best_value"] == pytest.approx(4 * math.sqrt(2), abs=1e-6)
        assert out["seed"] == 7

    def test_cluster_reduced_default(self, capsys):
        out = report(capsys, "optimize", "optimize", "--objective", "cluster-reduced")
        assert out["best_value"] >= 5.7442 - 1e-3

    def test_full(self, capsys):
        out = report(capsys, "optimize", "optimize", "--objective", "full", "--state", "ghz", "--n", "4", "--plane", "xy")
        assert out["best_value"] >= 5.6568 - 1e-3
        assert len(out["best_angles"]) == 8

    def test_config_file(self, capsys, tmp_path):
        f = tmp_path / "cfg.json"
        f.write_text(json.dumps({"restarts": 3, "seed": 9, "tol": 1e-8, "max_iters": 500}))
        out = report(capsys, "optimize", "optimize", "--objective", "w-reduced", "--config", str(f))
        assert out["restarts_used"] == 3 and out["seed"] == 9

    def test_unknown_objective(self, capsys):
        code, _, _ = run(capsys, "optimize", "--objective", "banana")
        assert code == 64

    def test_bad_restarts(self, capsys):
        code, _, _ = run(capsys, "optimize", "--objective", "ghz-reduced", "--restarts", "0")
        assert code == 65


class TestLHV:
    def test_bound(self, capsys):
        out = report(capsys, "lhv_bound", "lhv", "bound", "--n", "4", "--form", "correlator")
        assert out["bound"] == "4"

    def test_probability_bound(self, capsys):
        assert report(capsys, "lhv_bound", "lhv", "bound", "--n", "3", "--form", "probability")["bound"] == "0"

    def test_capacity_exit_65(self, capsys):
        code, _, err = run(capsys, "lhv", "bound", "--n", "9")
        assert code == 65 and "limited" in err

    def test_identity(self, capsys):
        out = report(capsys, "lhv_identity", "lhv", "identity", "--n", "2")
        assert out["nonneg"] is True and out["count"] == 8

    def test_jpd_behavior_file(self, capsys):
        out = report(capsys, "lhv_jpd", "lhv", "jpd", "--behavior", str(DATA / "singlet_chsh.json"))
        assert out["feasible"] is False
        assert "gwi_violation" in out["certificate"]

    def test_jpd_from_state(self, capsys):
        out = report(capsys, "lhv_jpd", "lhv", "jpd", "--state", "singlet:0.5", "--angles", "0", "1.57", "0.78", "-0.78")
        assert out["feasible"] is True and out["max_residual"] <= 1e-9

    def test_jpd_capacity(self, capsys, tmp_path):
        code, _, _ = run(capsys, "lhv", "jpd", "--state", "ghz", "--n", "5", "--angles", *["0"] * 10)
        assert code == 65

    def test_jpd_bad_file(self, capsys, tmp_path):
        f = tmp_path / "b.json"
        f.write_text(json.dumps({"n": 2, "distributions": {"00": [1, 0, 0, 0]}}))
        code, _, _ = run(capsys, "lhv", "jpd", "--behavior", str(f))
        assert code == 65


class TestVisibility:
    def test_cluster(self, capsys):
        out = report(capsys, "visibility", "visibility", "--state", "cluster4", "--restarts", "64")
        assert out["threshold"] == pytest.approx(0.6964, abs=1e-3)
        assert out["bracket"]["ok"]

    def test_singlet(self, capsys):
        out = report(capsys, "visibility", "visibility", "--state", "singlet", "--restarts", "16")
        assert out["threshold"] == pytest.approx(1 / math.sqrt(2), abs=1e-6)


class TestReproduce:
    ARGS = ("reproduce", "--restarts", "16")

    def test_json_schema_and_determinism(self, capsys):
        code1, out1, _ = run(capsys, *self.ARGS, "--format", "json")
        code2, out2, _ = run(capsys, *self.ARGS, "--format", "json")
        a, b = json.loads(out1), json.loads(out2)
        jsonschema.validate(a, SCHEMAS["reproduce"])
        assert code1 == code2
        a.pop("timings"), b.pop("timings")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
        quantities = {r["quantity"] for r in a["outputs"]["rows"]}
        for q in ("max_violation_ghz_reduced", "max_violation_cluster4_reduced", "max_violation_w_reduced",
                  "visibility_ghz", "visibility_cluster4", "visibility_w"):
            assert q in quantities

    def test_csv(self, capsys):
        code, out, err = run(capsys, *self.ARGS, "--format", "csv")
        assert out.endswith("\r\n")
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["quantity", "target", "computed", "tolerance", "comparison", "gating", "passed"]
        assert len(rows) > 30 and all(len(r) == 7 for r in rows)
        failed = [r[0] for r in rows[1:] if r[5] == "True" and r[6] == "False"]
        assert (code == 0) == (not failed)
        if failed:
            assert code == 1 and "MISMATCHES" in err
            assert all(q in err for q in failed)

    def test_markdown(self, capsys):
        _, out, _ = run(capsys, *self.ARGS, "--format", "markdown")
        lines = out.splitlines()
        assert lines[0].startswith("| quantity |") and lines[1].startswith("|---|")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "gwi", "lhv", "bound", "--n", "2"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["outputs"]["bound"] == "2"


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
