import json
import math

import numpy as np
import pytest

from kerrsim.cli import EXIT_COMPARISON, EXIT_CONFIG, EXIT_OK, main


MOMENTS_INI = """
[experiment]
kind = moments
backend = analytic

[model]
alpha0 = 1.5
kappa = 1.0
gamma = 0.0

[sampling]
t_max = pi/4
n_samples = 5
n_theta = 2
orders = 1,2
"""


@pytest.fixture
def moments_config(tmp_path):
    path = tmp_path / "cfg.ini"
    path.write_text(MOMENTS_INI)
    return path


class TestRunVerb:
    def test_successful_run(self, moments_config, tmp_path, capsys):
        code = main(["run", str(moments_config), "--output-dir", str(tmp_path / "out")])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "moments.csv" in out

    def test_missing_config(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.ini")]) == EXIT_CONFIG

    def test_invalid_config(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[experiment]\nkind = bogus\n\n[model]\nalpha0 = 1\n")
        assert main(["run", str(bad)]) == EXIT_CONFIG


class TestCompareVerb:
    def test_identical_and_tampered(self, moments_config, tmp_path, capsys):
        main(["run", str(moments_config), "--output-dir", str(tmp_path / "a")])
        main(["run", str(moments_config), "--output-dir", str(tmp_path / "b")])
        run_a = next((tmp_path / "a").iterdir())
        run_b = next((tmp_path / "b").iterdir())
        assert main(["compare", str(run_a), str(run_b), "--tol", "0"]) == EXIT_OK
        capsys.readouterr()
        # tamper with one value and expect a comparison failure
        target = run_b / "moments.csv"
        lines = target.read_text().splitlines()
        head = [ln for ln in lines if ln.startswith("#") or "," not in ln or "x" in ln][:0]
        body = lines[:]
        last = body[-1].split(",")
        last[1] = repr(float(last[1]) + 1.0)
        body[-1] = ",".join(last)
        target.write_text("\n".join(body) + "\n")
        code = main(["compare", str(run_a), str(run_b), "--tol", "1e-10"])
        assert code == EXIT_COMPARISON

    def test_report_file(self, moments_config, tmp_path):
        main(["run", str(moments_config), "--output-dir", str(tmp_path / "a")])
        run_a = next((tmp_path / "a").iterdir())
        report = tmp_path / "report.json"
        code = main(["compare", str(run_a), str(run_a), "--tol", "0",
                     "--report", str(report)])
        assert code == EXIT_OK
        assert json.loads(report.read_text())["ok"]

    def test_missing_run_is_config_error(self, tmp_path):
        assert main(["compare", str(tmp_path / "x"), str(tmp_path / "y")]) == EXIT_CONFIG


class TestExportRasterVerb:
    def test_roundtrip(self, tmp_path, capsys):
        cfg = tmp_path / "snap.ini"
        cfg.write_text("""
[experiment]
kind = wigner-snapshot

[model]
alpha0 = 1.0

[solver]
k_max = 6
dr = 0.05

[detail]
times = 0.05
""")
        assert main(["run", str(cfg), "--output-dir", str(tmp_path / "out")]) == EXIT_OK
        run_dir = next((tmp_path / "out").iterdir())
        out = tmp_path / "raster.csv"
        code = main(["export-raster", str(run_dir / "wigner_000.csv"),
                     "--phi-step", "pi/100", "-o", str(out)])
        assert code == EXIT_OK
        data = np.loadtxt(out.read_text().splitlines()[3:], delimiter=",")
        # phi column advances in steps of pi/100
        assert data[1, 1] - data[0, 1] == pytest.approx(math.pi / 100)

    def test_missing_dump(self, tmp_path):
        assert main(["export-raster", str(tmp_path / "nope.csv")]) == EXIT_CONFIG

    def test_bad_phi_step(self, tmp_path):
        dump = tmp_path / "d.csv"
        dump.write_text("# x = 1\n")
        assert main(["export-raster", str(dump), "--phi-step", "import os"]) == EXIT_CONFIG
