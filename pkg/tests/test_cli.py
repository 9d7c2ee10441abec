import json
import os
import subprocess
import sys

import pytest

from plate_afem import cli


def run_cli(args):
    return cli.main(args)


@pytest.fixture
def square_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "geometry": "square", "bc": "clamped", "J": {"n": 0, "N": 1},
        "theta": 0.5, "max_levels": 5,
    }))
    return str(path)


class TestRun:
    def test_run_writes_trace_and_manifest(self, square_config, tmp_path):
        out = str(tmp_path / "trace.csv")
        assert run_cli(["run", "--config", square_config, "--out", out]) == 0
        lines = open(out).read().splitlines()
        assert lines[0].startswith("level,ndof,")
        assert len(lines) == 7  # header + 6 levels
        manifest = json.load(open(out + ".manifest.json"))
        assert manifest["levels"] == 6
        assert len(manifest["mesh_hashes"]) == 6
        for path in manifest["outputs"]:
            assert os.path.exists(path) and os.path.getsize(path) > 0

    def test_missing_config_exit_2(self, tmp_path):
        out = str(tmp_path / "t.csv")
        assert run_cli(["run", "--config", str(tmp_path / "nope.json"),
                        "--out", out]) == 2

    def test_malformed_config_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run_cli(["run", "--config", str(bad),
                        "--out", str(tmp_path / "t.csv")]) == 2

    def test_invalid_theta_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"geometry": "square", "theta": 1.5}))
        assert run_cli(["run", "--config", str(bad),
                        "--out", str(tmp_path / "t.csv")]) == 2

    def test_unknown_key_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"geometry": "square", "typo_key": 1}))
        assert run_cli(["run", "--config", str(bad),
                        "--out", str(tmp_path / "t.csv")]) == 2

    def test_deterministic_byte_identical(self, square_config, tmp_path):
        out1 = str(tmp_path / "t1.csv")
        out2 = str(tmp_path / "t2.csv")
        assert run_cli(["run", "--config", square_config, "--out", out1,
                        "--deterministic"]) == 0
        assert run_cli(["run", "--config", square_config, "--out", out2,
                        "--deterministic"]) == 0
        assert open(out1, "rb").read() == open(out2, "rb").read()
        m1 = open(out1 + ".manifest.json").read().replace("t1.csv", "X")
        m2 = open(out2 + ".manifest.json").read().replace("t2.csv", "X")
        assert m1 == m2

    def test_dump_mesh(self, square_config, tmp_path):
        out = str(tmp_path / "trace.csv")
        meshdir = str(tmp_path / "meshes")
        assert run_cli(["run", "--config", square_config, "--out", out,
                        "--dump-mesh", meshdir]) == 0
        files = sorted(os.listdir(meshdir))
        assert files[0] == "mesh_level_0.json"
        assert len(files) == 6


class TestRates:
    def test_rates_from_trace(self, square_config, tmp_path, capsys):
        out = str(tmp_path / "trace.csv")
        run_cli(["run", "--config", square_config, "--out", out])
        assert run_cli(["rates", out, "--quantity", "eta2"]) == 0
        captured = capsys.readouterr().out
        assert "eta2 rate vs ndof:" in captured

    def test_rates_missing_file(self, tmp_path):
        assert run_cli(["rates", str(tmp_path / "absent.csv")]) == 2

    def test_lambda_err_requires_reference(self, square_config, tmp_path):
        out = str(tmp_path / "trace.csv")
        run_cli(["run", "--config", square_config, "--out", out])
        assert run_cli(["rates", out, "--quantity", "lambda_err"]) == 2
        assert run_cli(["rates", out, "--quantity", "lambda_err",
                        "--reference", "1294.96"]) == 0


class TestReference:
    def test_reference_with_spectrum_dump(self, tmp_path, capsys):
        out = str(tmp_path / "spectrum.csv")
        assert run_cli(["reference", "--geometry", "square", "--bc", "clamped",
                        "--J", "1", "--ndof", "600", "--out", out]) == 0
        text = capsys.readouterr().out
        assert "lambda_1: extrapolated" in text
        lines = open(out).read().splitlines()
        assert lines[0] == "index,eigenvalue,residual,lower_bound"
        first = lines[1].split(",")
        assert float(first[3]) <= float(first[1])


class TestHelmholtzAudit:
    @pytest.mark.parametrize("geometry,bc", [
        ("square", "clamped"), ("lshape", "mixed"),
        ("lshape", "simply_supported"),
    ])
    def test_audit_passes(self, geometry, bc, tmp_path):
        out = str(tmp_path / "report.json")
        code = run_cli(["helmholtz-audit", "--geometry", geometry,
                        "--bc", bc, "--out", out])
        assert code == 0
        report = json.load(open(out))
        assert report["euler_ok"] and report["dim_identity_ok"]
        assert report["residuals"]["decomposition_relative"] <= 1e-9


class TestMeshExport:
    def test_export_and_reload(self, tmp_path):
        out = str(tmp_path / "mesh.json")
        assert run_cli(["mesh-export", "--geometry", "lshape",
                        "--bc", "clamped", "--refine", "1", "--out", out]) == 0
        from plate_afem.mesh import load_mesh
        m = load_mesh(out)
        assert m.num_triangles == 24


class TestConsoleScript:
    def test_entry_point_runs(self, tmp_path):
        # the installed script must work in a fresh interpreter
        result = subprocess.run(
            [sys.executable, "-m", "plate_afem.cli", "mesh-export",
             "--geometry", "square", "--bc", "free",
             "--out", str(tmp_path / "m.json")],
            capture_output=True, text=True)
        assert result.returncode == 0, result.stderr


class TestNumericalFailureExit:
    def test_window_too_large_exit_3(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "geometry": "square", "bc": "clamped", "J": {"n": 1, "N": 1},
            "max_levels": 1,
        }))
        assert run_cli(["run", "--config", str(cfg),
                        "--out", str(tmp_path / "t.csv")]) == 3
