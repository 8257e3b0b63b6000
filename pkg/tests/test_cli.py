import csv
import io
import json
import math
import subprocess
import sys

import pytest

from fracspec.cli import (
    EXIT_DOMAIN,
    EXIT_OK,
    EXIT_USAGE,
    RunConfig,
    main,
    read_run_config,
)
from fracspec.errors import DomainError


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestSpecial:
    def test_psi_table(self, capsys):
        code, out, _ = run(["special", "--psi", "--N", "3", "--s", "0.5", "--t", "0,0.5,1", "--format", "json"],
                           capsys)
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["tables"]["psi"]["t"] == [0.0, 0.5, 1.0]
        assert data["tables"]["psi"]["value"][-1] == pytest.approx(0.5, abs=1e-14)

    def test_kappa(self, capsys):
        code, out, _ = run(["special", "--kappa", "--N", "3", "--s", "0.5"], capsys)
        assert code == EXIT_OK
        assert float(out.strip().split("=")[1]) == pytest.approx(math.pi, rel=1e-14)

    def test_range_error(self, capsys):
        code, _, err = run(["special", "--psi", "--t", "1.5"], capsys)
        assert code == EXIT_DOMAIN
        assert "[0, 1]" in err

    def test_no_quantity(self, capsys):
        code, _, _ = run(["special"], capsys)
        assert code == EXIT_USAGE

    def test_bad_order(self, capsys):
        code, _, _ = run(["special", "--b", "--s", "1.5"], capsys)
        assert code == EXIT_DOMAIN

    def test_csv_provenance(self, capsys):
        code, out, _ = run(["special", "--f", "--g", "--format", "csv"], capsys)
        assert code == EXIT_OK
        cfg = read_run_config(out)
        assert cfg.command == "special" and cfg.params["quantities"] == ["f", "g"]
        rows = list(csv.reader(io.StringIO(out.split("\n", 1)[1])))
        assert rows[0] == ["quantity", "argument", "at", "value"]


class TestSpectrum:
    def test_interval(self, capsys):
        code, out, _ = run(["spectrum", "--interval", "--s", "0.5", "--n-mesh", "64"], capsys)
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["ordered"] and data["second_changes_sign"]
        assert data["radial"][0]["lambda"] < data["radial"][1]["lambda"]

    def test_large_shell_nonradial(self, capsys):
        code, out, _ = run(["spectrum", "--N", "2", "--s", "0.5", "--R", "50", "--n-mesh", "64"], capsys)
        assert code == EXIT_OK
        assert json.loads(out)["nonradial"] is True

    def test_tau_scaling(self, capsys):
        code, out, _ = run(["spectrum", "--N", "2", "--s", "0.5", "--tau", "0.5", "--n-mesh", "32"], capsys)
        assert code == EXIT_OK
        scaling = json.loads(out)["scaling"]
        assert scaling["R"] == pytest.approx(1.0)
        assert len(scaling["relative_difference"]) == 2

    def test_conflicting_flags(self, capsys):
        code, _, _ = run(["spectrum", "--R", "5", "--tau", "0.5"], capsys)
        assert code == EXIT_USAGE

    def test_missing_geometry(self, capsys):
        code, _, _ = run(["spectrum", "--s", "0.5"], capsys)
        assert code == EXIT_USAGE

    def test_csv_file(self, tmp_path, capsys):
        target = tmp_path / "spec.csv"
        code, out, _ = run(["spectrum", "--interval", "--n-mesh", "32", "--format", "csv", "--out", str(target)],
                           capsys)
        assert code == EXIT_OK and out == ""
        text = target.read_text()
        assert read_run_config(text).params["n_mesh"] == 32
        assert text.splitlines()[1] == "j,lambda,q_inner,q_outer"


class TestSweep:
    ARGS = ["sweep", "R", "--N", "2", "--s", "0.5", "--from", "5", "--to", "20", "--points", "3",
            "--n-mesh", "32", "--workers", "1"]

    def test_csv(self, capsys):
        code, out, _ = run(self.ARGS, capsys)
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0].startswith("# run_config: ")
        assert lines[1].startswith("parameter,value,lambda1")
        assert any(line.startswith("# empirical_threshold") for line in lines)
        assert read_run_config(out).params["spacing"] == "geometric"

    def test_deterministic(self, capsys):
        first = run(self.ARGS + ["--format", "json"], capsys)[1]
        second = run(self.ARGS + ["--format", "json"], capsys)[1]
        assert first == second
        assert read_run_config(first) == read_run_config(second)

    def test_bad_range(self, capsys):
        code, _, _ = run(["sweep", "tau", "--from", "0.5", "--to", "0.2"], capsys)
        assert code == EXIT_DOMAIN

    def test_a_needs_tau(self, capsys):
        code, _, _ = run(["sweep", "a", "--s", "0.5"], capsys)
        assert code == EXIT_USAGE

    def test_a_resolution(self, capsys):
        code, _, err = run(["sweep", "a", "--tau", "0.85", "--to", "0.14", "--h", "0.05"], capsys)
        assert code == EXIT_DOMAIN
        assert err


class TestRunConfig:
    def test_round_trip(self):
        cfg = RunConfig("spectrum", {"mode": "R", "N": 2, "s": 0.5, "R": 50.0})
        assert RunConfig.from_json(cfg.to_json()) == cfg

    @pytest.mark.parametrize("params", [{"N": 1}, {"s": 0.0}, {"tau": 1.0}, {"h": 0.5}, {"from": 2, "to": 1}])
    def test_validation(self, params):
        with pytest.raises(DomainError):
            RunConfig("x", params).validate()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fracspec", "special", "--kappa", "--N", "3"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "kappa" in proc.stdout
