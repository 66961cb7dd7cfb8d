"""Command-line interface tests: exit codes, determinism, file outputs."""

import json

import numpy as np
import pytest

from slelab.cli import main
from slelab.config import ConfigError, RunConfig, build_config, load_config_file
from slelab.field import load_grid_function


def run(args):
    return main(args)


class TestConfig:
    def test_build_and_hash_stability(self):
        cfg = build_config("verify", {}, {"seed": 3, "grid_points": 17})
        assert cfg.seed == 3
        assert cfg.config_hash() == build_config(
            "verify", {}, {"seed": 3, "grid_points": 17}).config_hash()

    def test_cli_overrides_file(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[run]\nseed = 5\nsamples = 100\n")
        cfg = build_config("spectral-fuzz", load_config_file(path), {"seed": 9})
        assert cfg.seed == 9 and cfg.samples == 100

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            build_config("solve", {"bogus": "1"}, {})

    def test_missing_config_file(self):
        with pytest.raises(ConfigError):
            load_config_file("/nonexistent/run.ini")

    def test_sigma2_requires_n3(self):
        cfg = build_config("spectral-fuzz", {}, {"constraint": "sigma2", "n": 4})
        with pytest.raises(ConfigError):
            cfg.constraint_spec()

    def test_out_dir_not_hashed(self):
        a = build_config("verify", {}, {"out_dir": "/tmp/a"})
        b = build_config("verify", {}, {"out_dir": "/tmp/b"})
        assert a.config_hash() == b.config_hash()


class TestSpectralFuzzCommand:
    def test_cone_campaign_passes(self, tmp_path):
        code = run(["spectral-fuzz", "--n", "3", "--constraint", "cone",
                    "--samples", "5000", "--seed", "7", "--out", str(tmp_path)])
        assert code == 0
        reports = list(tmp_path.glob("spectral-fuzz-*.json"))
        assert len(reports) == 1
        payload = json.loads(reports[0].read_text())
        assert payload["violations"] == 0 and payload["pass"]

    def test_sigma2_reports_branch_counts(self, tmp_path):
        code = run(["spectral-fuzz", "--constraint", "sigma2", "--eps", "1",
                    "--samples", "5000", "--seed", "7", "--out", str(tmp_path)])
        assert code == 0
        payload = json.loads(next(tmp_path.glob("*.json")).read_text())
        assert payload["lambda2_negative_checked"] >= 1000
        assert payload["lambda2_negative_admissible"] == 0
        assert payload["lambda2_negative_feasible"] is False

    def test_sigma2_eps4_has_admissible_branch(self, tmp_path):
        code = run(["spectral-fuzz", "--constraint", "sigma2", "--eps", "4",
                    "--samples", "5000", "--seed", "7", "--out", str(tmp_path)])
        assert code == 0
        payload = json.loads(next(tmp_path.glob("*.json")).read_text())
        assert payload["lambda2_negative_feasible"] is True
        assert payload["lambda2_negative_admissible"] >= 1000

    def test_malformed_config_exits_2_without_outputs(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[run]\nn = banana\n")
        out = tmp_path / "out"
        code = run(["spectral-fuzz", "--config", str(bad), "--out", str(out)])
        assert code == 2
        assert not out.exists()

    def test_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["spectral-fuzz", "--n", "4", "--constraint", "cone",
                        "--samples", "2000", "--seed", "11", "--out", str(out)]) == 0
        fa, fb = next(a.glob("*.json")), next(b.glob("*.json"))
        assert fa.read_bytes() == fb.read_bytes()


class TestSolveCommand:
    def test_quadratic_spectrum_solve(self, tmp_path):
        code = run(["solve", "--spectrum", "1,1,0.5", "--grid-points", "9",
                    "--seed", "1", "--out", str(tmp_path)])
        assert code == 0
        summary = json.loads(next(tmp_path.glob("solve-*.json")).read_text())
        assert summary["converged"] and summary["residual_norm"] <= 1e-9
        u = load_grid_function(next(tmp_path.glob("solve-*.grid")))
        assert u.grid.points_per_axis == 9

    def test_unreachable_theta_exits_2(self, tmp_path):
        code = run(["solve", "--theta", "9.0", "--n", "3", "--out", str(tmp_path)])
        assert code == 2
        assert not tmp_path.exists() or not list(tmp_path.glob("*.json"))

    def test_missing_problem_exits_2(self, tmp_path):
        assert run(["solve", "--out", str(tmp_path)]) == 2

    def test_byte_identical_outputs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["solve", "--spectrum", "1,0.5,-0.2", "--grid-points", "9",
                        "--amplitude", "0.01", "--seed", "2",
                        "--out", str(out)]) == 0
        for name in ("solve-*.json", "solve-*.grid"):
            fa, fb = next(a.glob(name)), next(b.glob(name))
            assert fa.read_bytes() == fb.read_bytes()


class TestSweepCommand:
    def test_family_outputs(self, tmp_path):
        code = run(["sweep", "--constraint", "cone", "--count", "2",
                    "--grid-points", "9", "--seed", "1", "--out", str(tmp_path)])
        assert code == 0
        summary = json.loads(next(tmp_path.glob("sweep-*.json")).read_text())
        assert len(summary["instances"]) == 2
        grids = sorted(tmp_path.glob("sweep-*.grid"))
        assert len(grids) == 2
        u = load_grid_function(grids[0])
        assert np.isfinite(u.values).all()


@pytest.fixture(scope="module")
def verify_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify")
    code = run(["verify", "--seed", "1", "--grid-points", "9",
                "--check", "solves,geometry,appendix,doubling",
                "--out", str(out)])
    return code, out


class TestVerifyCommand:
    def test_exit_code_and_report(self, verify_out):
        code, out = verify_out
        assert code == 0
        payload = json.loads(next(out.glob("verify-*.json")).read_text())
        assert payload["pass"]
        assert set(payload["checks"]) == {"solves", "geometry", "appendix",
                                          "doubling"}

    def test_estimates_csv_header(self, verify_out):
        _, out = verify_out
        csv_path = next(out.glob("estimates-*.csv"))
        header = csv_path.read_text().splitlines()[0]
        assert header == "instance,quantity,value,r,y,grid"

    def test_unknown_check_rejected(self, tmp_path):
        assert run(["verify", "--check", "bogus", "--out", str(tmp_path)]) == 2


class TestReportCommand:
    def test_summarizes_existing_reports(self, tmp_path, capsys):
        assert run(["spectral-fuzz", "--n", "3", "--constraint", "cone",
                    "--samples", "2000", "--seed", "3", "--out", str(tmp_path)]) == 0
        assert run(["report", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "pass=True" in out

    def test_missing_directory_exits_2(self, tmp_path):
        assert run(["report", "--out", str(tmp_path / "nope")]) == 2
