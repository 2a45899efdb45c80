"""Command-line entry points.

    vkribbon SUBCOMMAND SCENARIO [--out DIR] [--seed N] [--quiet]

Subcommands: simulate-1d, simulate-2d, tau-study, reduce-study,
commute-study, gamma-check, slope-check, decouple-check, report.

Exit codes: 0 success; 64 unknown subcommand; 65 scenario errors;
3 hypothesis requirement violated; 2 solver failure (message carries the
step index); 1 anything else.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .config import Scenario, ScenarioError, load_scenario
from .flow import StepFailure, run_trajectory
from .io import (
    save_plate_state,
    save_ribbon_state,
    write_ledger,
    write_manifest,
)
from .plate import PlateSystem, RecoveryInputs, build_recovery
from .ribbon import RibbonSystem
from .studies import (
    HypothesisError,
    commutativity_report,
    decoupling_checks,
    epsilon_study,
    gamma_check,
    slope_consistency,
    tau_study,
)

SUBCOMMANDS = (
    "simulate-1d",
    "simulate-2d",
    "tau-study",
    "reduce-study",
    "commute-study",
    "gamma-check",
    "slope-check",
    "decouple-check",
    "report",
)

USAGE = __doc__


def _say(quiet, *msg):
    if not quiet:
        print(*msg)


def _manifest(scenario: Scenario, out_dir, outputs, started):
    os.makedirs(out_dir, exist_ok=True)
    write_manifest(
        os.path.join(out_dir, "manifest.txt"),
        scenario,
        scenario.material,
        outputs,
        __version__,
        started,
    )


def _ribbon(scenario: Scenario) -> RibbonSystem:
    return RibbonSystem(scenario.mesh1(), scenario.material, scenario.boundary, scenario.forces)


def cmd_simulate_1d(scenario, out_dir, seed, quiet):
    system = _ribbon(scenario)
    outputs = ["ledger.csv", "state_final.snap"]
    _manifest(scenario, out_dir, outputs, time.time())
    u0 = system.interpolate(*scenario.initial)
    traj = run_trajectory(
        system, u0, scenario.tau, scenario.T, scenario.solver, slope_fn=system.local_slope
    )
    write_ledger(os.path.join(out_dir, "ledger.csv"), traj)
    save_ribbon_state(os.path.join(out_dir, "state_final.snap"), system.state(traj.states[-1]))
    _say(quiet, f"simulate-1d: {traj.n_steps} steps, energy "
                f"{traj.reports[0].energy:.6e} -> {traj.reports[-1].energy:.6e}")
    return 0


def cmd_simulate_2d(scenario, out_dir, seed, quiet):
    eps = scenario.epsilon_list[0]
    outputs = ["ledger.csv", "state_final.snap"]
    _manifest(scenario, out_dir, outputs, time.time())
    ribbon = _ribbon(scenario)
    plate = PlateSystem(scenario.mesh2(), eps, scenario.material, scenario.boundary, scenario.forces)
    u0_1d = ribbon.interpolate(*scenario.initial)
    u0 = build_recovery(plate, RecoveryInputs(ribbon.state(u0_1d), scenario.cutoff_width))
    traj = run_trajectory(plate, u0, scenario.tau, scenario.T, scenario.solver)
    write_ledger(os.path.join(out_dir, "ledger.csv"), traj)
    save_plate_state(os.path.join(out_dir, "state_final.snap"), plate.state(traj.states[-1]))
    _say(quiet, f"simulate-2d: eps={eps}, {traj.n_steps} steps, energy "
                f"{traj.reports[0].energy:.6e} -> {traj.reports[-1].energy:.6e}")
    return 0


def cmd_tau_study(scenario, out_dir, seed, quiet):
    system = _ribbon(scenario)
    outputs = ["tau_study.csv"]
    _manifest(scenario, out_dir, outputs, time.time())
    u0 = system.interpolate(*scenario.initial)
    rep = tau_study(system, u0, scenario.tau_list, scenario.T, scenario.solver)
    rep.write_csv(os.path.join(out_dir, "tau_study.csv"))
    _say(quiet, f"tau-study: residual order {rep.summary['residual_order']:.3f}")
    return 0


def cmd_reduce_study(scenario, out_dir, seed, quiet):
    outputs = ["reduce_study.csv"]
    _manifest(scenario, out_dir, outputs, time.time())
    rep = epsilon_study(
        scenario.material,
        scenario.boundary,
        scenario.forces,
        scenario.epsilon_list,
        scenario.tau,
        scenario.T,
        scenario.mesh1(),
        scenario.mesh2(),
        scenario.initial,
        scenario.solver,
        scenario.cutoff_width,
    )
    rep.write_csv(os.path.join(out_dir, "reduce_study.csv"))
    _say(quiet, "reduce-study: done")
    return 0


def cmd_commute_study(scenario, out_dir, seed, quiet):
    outputs = ["commute_study.csv"]
    _manifest(scenario, out_dir, outputs, time.time())
    rep = commutativity_report(
        scenario.material,
        scenario.boundary,
        scenario.forces,
        scenario.epsilon_list,
        scenario.tau_list,
        scenario.T,
        scenario.mesh1(),
        scenario.mesh2(),
        scenario.initial,
        scenario.solver,
        scenario.cutoff_width,
    )
    rep.write_csv(os.path.join(out_dir, "commute_study.csv"))
    _say(quiet, "commute-study: done")
    return 0


def cmd_gamma_check(scenario, out_dir, seed, quiet):
    outputs = ["gamma_check.csv"]
    _manifest(scenario, out_dir, outputs, time.time())
    xi1, xi2, w, theta = scenario.initial
    targets = {
        "configured": scenario.initial,
        "twist_only": ((0.0,), (0.0,), (0.0,), theta),
    }
    rep = gamma_check(
        scenario.material,
        targets,
        scenario.epsilon_list,
        scenario.mesh1(),
        scenario.mesh2(),
        scenario.boundary,
        scenario.cutoff_width,
    )
    rep.write_csv(os.path.join(out_dir, "gamma_check.csv"))
    _say(quiet, f"gamma-check: orders {rep.summary['orders']}")
    return 0


def cmd_slope_check(scenario, out_dir, seed, quiet):
    system = _ribbon(scenario)
    outputs = ["slope_check.csv"]
    _manifest(scenario, out_dir, outputs, time.time())
    u0 = system.interpolate(*scenario.initial)
    traj = run_trajectory(system, u0, scenario.tau, scenario.T, scenario.solver)
    rep = slope_consistency(system, traj)
    rep.write_csv(os.path.join(out_dir, "slope_check.csv"))
    _say(quiet, f"slope-check: final ratio {rep.summary['final_ratio']:.6f}")
    return 0


def cmd_decouple_check(scenario, out_dir, seed, quiet):
    outputs = ["decouple_check.csv"]
    _manifest(scenario, out_dir, outputs, time.time())
    rep = decoupling_checks(scenario.material, scenario.mesh1(), scenario.tau, scenario.T, scenario.solver)
    rep.write_csv(os.path.join(out_dir, "decouple_check.csv"))
    _say(quiet, f"decouple-check: {rep.summary}")
    return 0


def cmd_report(scenario, out_dir, seed, quiet):
    manifest = os.path.join(out_dir, "manifest.txt")
    if not os.path.exists(manifest):
        print(f"report: no manifest at {manifest}", file=sys.stderr)
        return 1
    with open(manifest) as f:
        lines = f.read().splitlines()
    print(f"# manifest: {manifest}")
    for ln in lines:
        if not ln.startswith("config."):
            print(ln)
    for ln in lines:
        if ln.startswith("output = "):
            name = ln.split(" = ", 1)[1]
            path = os.path.join(out_dir, name)
            if os.path.exists(path):
                with open(path) as f:
                    rows = f.read().splitlines()
                print(f"{name}: {max(len(rows) - 1, 0)} rows, header: {rows[0] if rows else ''}")
            else:
                print(f"{name}: MISSING")
    return 0


_DISPATCH = {
    "simulate-1d": cmd_simulate_1d,
    "simulate-2d": cmd_simulate_2d,
    "tau-study": cmd_tau_study,
    "reduce-study": cmd_reduce_study,
    "commute-study": cmd_commute_study,
    "gamma-check": cmd_gamma_check,
    "slope-check": cmd_slope_check,
    "decouple-check": cmd_decouple_check,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(USAGE)
        return 0
    sub = argv[0]
    if sub not in SUBCOMMANDS:
        print(f"unknown subcommand {sub!r}", file=sys.stderr)
        print(USAGE, file=sys.stderr)
        return 64

    parser = argparse.ArgumentParser(prog=f"vkribbon {sub}", add_help=True)
    parser.add_argument("scenario", help="path to the scenario configuration file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="seed for sampled suites")
    parser.add_argument("--quiet", action="store_true")
    try:
        args = parser.parse_args(argv[1:])
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        scenario = load_scenario(args.scenario)
    except FileNotFoundError:
        print(f"scenario file not found: {args.scenario}", file=sys.stderr)
        return 65
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 65

    out_dir = args.out or scenario.out_dir
    seed = scenario.seed if args.seed is None else args.seed
    np.random.seed(seed % 2**32)

    try:
        return _DISPATCH[sub](scenario, out_dir, seed, args.quiet)
    except HypothesisError as exc:
        print(f"hypothesis requirement: {exc}", file=sys.stderr)
        return 3
    except StepFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    raise SystemExit(main())
