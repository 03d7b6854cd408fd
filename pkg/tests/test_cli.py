import json
import os
import subprocess
import sys
from pathlib import Path

from appellforms.cli import build_spec, load_spec, main
from appellforms.fseries import FSeries, series_equal

from oracles import phi_geometric

ROOT = Path(__file__).resolve().parent.parent
SPECS = ROOT / "specs"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, text, name="spec.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestExpand:
    def test_golden_fixture(self, capsys):
        code, out, _ = run(capsys, "expand", "--spec", SPECS / "a2_depth2.yaml", "--q-cutoff", 3, "--w-window", 6)
        assert code == 0
        result = json.loads(out)["result"]
        golden = json.loads((FIXTURES / "a2_expand_result.json").read_text())
        assert result == golden
        # the fixture itself agrees with the independent geometric expansion
        spec = build_spec(load_spec(SPECS / "a2_depth2.yaml"))
        assert series_equal(FSeries.from_json(golden["series"]), phi_geometric(spec, 3, 6))

    def test_deterministic_bytes(self, tmp_path, capsys):
        outs = []
        for name in ("one.json", "two.json"):
            target = tmp_path / name
            code, _, _ = run(capsys, "expand", "--spec", SPECS / "a2_depth2.yaml", "--q-cutoff", 2,
                             "--w-window", 4, "--kind", "s", "--out", target)
            assert code == 0
            outs.append(target.read_bytes())
        assert outs[0] == outs[1]

    def test_out_leaves_no_temporaries(self, tmp_path, capsys):
        target = tmp_path / "report.txt"
        code, out, _ = run(capsys, "theta", "--spec", SPECS / "a2_depth2.yaml", "--q-cutoff", 2,
                           "--format", "text", "--out", target)
        assert code == 0 and out == ""
        assert os.listdir(tmp_path) == ["report.txt"]
        assert "provenance" in target.read_text()

    def test_provenance(self, capsys):
        code, out, _ = run(capsys, "theta", "--spec", SPECS / "a2_depth2.yaml", "--q-cutoff", 1)
        doc = json.loads(out)
        assert code == 0 and doc["ok"]
        prov = doc["provenance"]
        assert prov["command"] == "theta" and len(prov["spec_sha256"]) == 64
        assert {"python", "numpy", "scipy"} <= set(prov["versions"])


class TestCommands:
    def test_lattice_info(self, capsys):
        code, out, _ = run(capsys, "lattice-info", "--an", 3)
        assert code == 0
        assert json.loads(out)["result"]["det"] == "4"  # exact rationals are strings

    def test_glue(self, capsys):
        code, out, _ = run(capsys, "glue", "--spec", SPECS / "a2_depth2.yaml", "--subset", 1)
        assert code == 0
        assert json.loads(out)["ok"]

    def test_identities(self, capsys):
        code, out, _ = run(capsys, "identities", "--spec", SPECS / "a3_psi.yaml", "--q-cutoff", 3)
        assert code == 0
        assert json.loads(out)["ok"]

    def test_errfun(self, tmp_path, capsys):
        spec = write(tmp_path, "errfun: {gram: [[1, 0], [0, 1]], c_vectors: [[1, 0], [0, 1]], x: ['1/2', '-1/3']}\n")
        code, out, _ = run(capsys, "errfun-eval", "--spec", spec)
        result = json.loads(out)["result"]
        assert code == 0 and result["depth"] == 2
        assert -1 < result["E"] < 0

    def test_psi(self, capsys):
        code, out, _ = run(capsys, "psi", "--n", 2, "--q-cutoff", 3, "--w-window", 16)
        assert code == 0 and json.loads(out)["ok"]

    def test_complete_eval_two_routes(self, capsys):
        code, out, _ = run(capsys, "complete-eval", "--spec", SPECS / "a2_depth2.yaml", "--tau", 0, 1,
                           "--z", 0.21, 0.25, "--route", "both")
        assert code == 0
        assert json.loads(out)["result"]["residuals"]["two_route"] < 1e-8

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "appellforms", "lattice-info", "--an", "2", "--format", "text"],
                              capture_output=True, text=True, cwd=ROOT)
        assert proc.returncode == 0
        assert "det" in proc.stdout


class TestExitCodes:
    def test_failed_check_is_one(self, capsys):
        code, out, _ = run(capsys, "modular-check", "--spec", SPECS / "a1_depth1.yaml", "--tau", 0, 1,
                           "--z", 0.23, 0.11, "--z", -0.17, 0.31, "--check-tol", 1e-15)
        assert code == 1
        assert json.loads(out)["ok"] is False

    def test_math_error_is_one(self, capsys):
        code, _, err = run(capsys, "complete-eval", "--spec", SPECS / "a2_depth2.yaml", "--tau", 0, 1,
                           "--z", 0.21, 0.37, "--route", "both")
        assert code == 1 and "wall" in err

    def test_missing_file_is_two(self, capsys):
        code, _, err = run(capsys, "expand", "--spec", "/nonexistent/spec.yaml")
        assert code == 2 and err.startswith("error")

    def test_unknown_command_is_two(self, capsys):
        assert run(capsys, "frobnicate")[0] == 2

    def test_yaml_position(self, tmp_path, capsys):
        spec = write(tmp_path, "lattice: {an: 2}\ndvectors: [[1, 0]\nmu: [0, 0]\n")
        code, _, err = run(capsys, "expand", "--spec", spec)
        assert code == 2
        assert "line" in err and "column" in err

    def test_unknown_key(self, tmp_path, capsys):
        spec = write(tmp_path, "lattice: {an: 2}\ndvectors: [[1, 0]]\ncolour: blue\n")
        code, _, err = run(capsys, "expand", "--spec", spec)
        assert code == 2 and "colour" in err

    def test_floats_rejected(self, tmp_path, capsys):
        spec = write(tmp_path, "lattice: {an: 1}\ndvectors: [[1]]\nmu: [0.5]\nnu: [0]\n")
        assert run(capsys, "expand", "--spec", spec)[0] == 2

    def test_wrong_z_count(self, capsys):
        code, _, err = run(capsys, "complete-eval", "--spec", SPECS / "a2_depth2.yaml", "--tau", 0, 1)
        assert code == 2 and "--z" in err

    def test_failed_report_is_still_written(self, tmp_path, capsys):
        target = tmp_path / "fail.json"
        code, _, _ = run(capsys, "modular-check", "--spec", SPECS / "a1_depth1.yaml", "--tau", 0, 1,
                         "--z", 0.23, 0.11, "--z", -0.17, 0.31, "--check-tol", 1e-15, "--out", target)
        assert code == 1
        assert json.loads(target.read_text())["ok"] is False
