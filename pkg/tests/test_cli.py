import csv
import json
import os
import subprocess
import sys

import pytest

from lfslab import cli
from lfslab.errors import ConvergenceError


def run(tmp_path, *args):
    return cli.main(["run", "--out", str(tmp_path), *args])


class TestParsing:
    @pytest.mark.parametrize(
        "text, value",
        [("true", True), ("off", False), ("none", None), ("3", 3), ("1e-9", 1e-9), ("inf", float("inf")), ("flrw", "flrw")],
    )
    def test_parse_value(self, text, value):
        assert cli.parse_value(text) == value

    def test_precedence(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("model.name = flrw  # comment\nseed = 4\nN = 7\n")
        args, extra = cli._parser().parse_known_args(
            ["run", "--config", str(conf), "--seed", "5", "--set", "N=9", "--grid.count", "7", "--model.H=0.5"]
        )
        cfg = cli.build_config(args, extra)
        assert (cfg["model.name"], cfg["seed"], cfg["N"], cfg["grid.count"], cfg["model.H"]) == ("flrw", 5, 9, 7, 0.5)

    def test_bad_config_line(self, tmp_path):
        conf = tmp_path / "bad.conf"
        conf.write_text("just words\n")
        with pytest.raises(cli.ConfigurationError):
            cli.read_config(str(conf))

    @pytest.mark.parametrize("cfg_update", [{"nonsense": 1}, {"experiment": "teleport"}, {"tol.ode": -1.0}])
    def test_validation(self, cfg_update):
        cfg = dict(cli.DEFAULTS)
        cfg.update(cfg_update)
        with pytest.raises(cli.ConfigurationError):
            cli.validate(cfg)


class TestExitCodes:
    def test_list(self, capsys):
        assert cli.main(["list"]) == 0
        assert "minkowski" in capsys.readouterr().out.split()

    def test_describe(self, capsys):
        assert cli.main(["describe", "flrw"]) == 0
        assert "exp(2 H x^0)" in capsys.readouterr().out

    @pytest.mark.parametrize(
        "args",
        [
            ["--model", "nowhere"],
            ["--experiment", "nothing"],
            ["--unknown.key", "1"],
            ["--experiment", "raychaudhuri", "--N", "2", "--eps", "1.5", "--dim", "4"],
        ],
    )
    def test_configuration_errors(self, tmp_path, args):
        assert run(tmp_path, *args) == 2

    def test_numerical_failure(self, tmp_path, monkeypatch):
        def stalls(m, cfg):
            raise ConvergenceError("stalled", diagnostics={})

        monkeypatch.setitem(cli.RUNNERS, "audit", stalls)
        assert run(tmp_path) == 3

    def test_invalid_model_fails_audit(self, tmp_path):
        assert run(tmp_path, "--model", "flat-quartic", "--model.eps", "-50", "--samples", "200") == 1
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["status"] == "fail"

    def test_failing_scenario_returns_one(self, tmp_path):
        args = ["--model", "weighted-minkowski", "--experiment", "splitting", "--split.samples", "1"]
        assert run(tmp_path, *args) == 1


class TestOutputs:
    def test_raychaudhuri(self, tmp_path):
        assert run(tmp_path, "--experiment", "raychaudhuri", "--grid.count", "10") == 0
        rows = list(csv.reader(open(tmp_path / "raychaudhuri.csv")))
        assert rows[0] == ["t", "theta_eps", "trace_sigma2", "residual"] and len(rows) == 11
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["status"] == "pass"
        assert "raychaudhuri" in (tmp_path / "report.txt").read_text()

    def test_legendre(self, tmp_path):
        assert run(tmp_path, "--model", "nonberwald-quartic", "--experiment", "legendre-roundtrip", "--samples", "20") == 0
        assert os.path.exists(tmp_path / "legendre.csv")

    def test_laplacian(self, tmp_path):
        assert run(tmp_path, "--experiment", "laplacian-comparison", "--comparison.equality", "true", "--grid.count", "10") == 0
        for name in ("comparison_forward.csv", "comparison_reverse.csv"):
            assert os.path.exists(tmp_path / name)

    def test_audit_threads_preserve_results(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LFSLAB_THREADS", "2")
        assert run(tmp_path, "--experiment", "busemann", "--samples", "3", "--busemann.support_points", "3") == 0
        rows = list(csv.reader(open(tmp_path / "busemann.csv")))
        assert len(rows) == 1 + 2 * 3 * 4

    def test_bad_thread_count(self, monkeypatch):
        monkeypatch.setenv("LFSLAB_THREADS", "many")
        with pytest.raises(cli.ConfigurationError):
            cli.worker_count()

    def test_fan_out_order(self, monkeypatch):
        monkeypatch.setenv("LFSLAB_THREADS", "4")
        assert cli.fan_out(lambda k: k * k, range(10)) == [k * k for k in range(10)]


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lfslab.cli", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "flrw" in proc.stdout
