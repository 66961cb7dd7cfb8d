"""Command-line interface.

Subcommands: spectral-fuzz, solve, verify, sweep, report.  Outputs land under
--out, the SLELAB_OUT environment variable, or ./slelab-out, and are
byte-reproducible for identical configs.  Exit codes: 0 pass, 1 assertion
failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, build_config, load_config_file
from .field import Grid, save_grid_function
from .pipeline import run_spectral_fuzz, run_verify
from .reports import read_report, write_estimate_csv, write_report
from .solver import (PhaseProblem, instance_family, newton_solve,
                     quadratic_solution, _boundary_bump, _seeded_rotation)


def _common_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key-value config file with a [run] section")
    p.add_argument("--out", dest="out_dir", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="dimension")
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--grid-l", dest="grid_l", type=float)
    p.add_argument("--constraint", choices=("cone", "sigma2"))
    p.add_argument("--eps", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--jobs", type=int)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slelab",
        description="Numerical laboratory for the special Lagrangian equation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectral-fuzz", help="eigenvalue-lemma fuzz campaign")
    _common_flags(p)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("solve", help="solve one Dirichlet instance")
    _common_flags(p)
    p.add_argument("--spectrum", help="comma-separated quadratic-core eigenvalues")
    p.add_argument("--theta", type=float)
    p.add_argument("--amplitude", type=float, help="boundary bump size in units of L^2")
    p.add_argument("--rotate", action=argparse.BooleanOptionalAction, default=None,
                   help="conjugate the diagonal core by a seeded rotation")

    p = sub.add_parser("verify", help="consolidated verification pipeline")
    _common_flags(p)
    p.add_argument("--check", help="comma-separated subset of checks (default all)")
    p.add_argument("--r", type=float, help="doubling small-ball radius")
    p.add_argument("--count", type=int)

    p = sub.add_parser("sweep", help="solve a whole instance family")
    _common_flags(p)
    p.add_argument("--count", type=int)
    p.add_argument("--amplitudes", help="comma-separated amplitude grades")

    p = sub.add_parser("report", help="summarize reports in the output directory")
    p.add_argument("--out", dest="out_dir")
    return parser


def cmd_spectral_fuzz(cfg: RunConfig) -> int:
    payload = run_spectral_fuzz(cfg)
    root = cfg.output_root()
    write_report(root / f"spectral-fuzz-{cfg.config_hash()}.json", payload,
                 cfg.config_hash())
    print(f"spectral-fuzz: {payload['samples']} samples, "
          f"{payload['violations']} violations -> "
          f"{'pass' if payload['pass'] else 'FAIL'}")
    return 0 if payload["pass"] else 1


def _single_problem(cfg: RunConfig) -> PhaseProblem:
    grid = Grid(cfg.n, (0.0,) * cfg.n, cfg.grid_l, cfg.grid_points)
    rng = np.random.default_rng(cfg.seed)
    if cfg.spectrum is None and cfg.theta is None:
        raise ConfigError("solve needs --spectrum or --theta")
    if cfg.spectrum is not None:
        A = np.diag(cfg.spectrum)
        if cfg.rotate:
            Q = _seeded_rotation(rng, cfg.n)
            A = Q @ A @ Q.T
        core, theta = quadratic_solution(grid, A)
        boundary = core.values.copy()
    else:
        theta = cfg.theta
        boundary = np.zeros(grid.shape)
    if cfg.theta is not None:
        theta = cfg.theta
    if cfg.amplitude:
        boundary = boundary + cfg.amplitude * cfg.grid_l ** 2 * _boundary_bump(grid, rng)
    try:
        constraint = cfg.constraint_spec()
    except (ConfigError, ValueError):
        constraint = None  # constraint tracking is optional for plain solves
    return PhaseProblem(grid, theta, boundary, constraint,
                        metadata={"spectrum": cfg.spectrum, "seed": cfg.seed,
                                  "amplitude": cfg.amplitude})


def cmd_solve(cfg: RunConfig) -> int:
    prob = _single_problem(cfg)
    out = newton_solve(prob, tol=cfg.tol)
    root = cfg.output_root()
    root.mkdir(parents=True, exist_ok=True)
    tag = cfg.config_hash()
    save_grid_function(out.u, root / f"solve-{tag}.grid")
    write_report(root / f"solve-{tag}.json", {
        "converged": out.converged,
        "iterations": out.iterations,
        "residual_norm": out.residual_norm,
        "constraint_violation_fraction": out.constraint_violation_fraction,
        "theta": prob.theta,
        "solution_file": f"solve-{tag}.grid",
    }, tag)
    print(f"solve: converged={out.converged} iterations={out.iterations} "
          f"residual={out.residual_norm:.3e}")
    return 0 if out.converged else 1


def cmd_verify(cfg: RunConfig) -> int:
    payload, records = run_verify(cfg)
    root = cfg.output_root()
    tag = cfg.config_hash()
    write_report(root / f"verify-{tag}.json", payload, tag)
    write_estimate_csv(root / f"estimates-{tag}.csv", records)
    for cid, chk in payload["checks"].items():
        print(f"verify[{cid}]: {'pass' if chk.get('pass', True) else 'FAIL'}")
    return 0 if payload["pass"] else 1


def cmd_sweep(cfg: RunConfig) -> int:
    spec = cfg.constraint_spec()
    grid = Grid(cfg.n, (0.0,) * cfg.n, cfg.grid_l, cfg.grid_points)
    family = instance_family(cfg.seed, spec, cfg.count, grid, cfg.amplitudes)
    root = cfg.output_root()
    root.mkdir(parents=True, exist_ok=True)
    tag = cfg.config_hash()
    rows = []
    all_ok = True
    for k, prob in enumerate(family):
        out = newton_solve(prob, tol=cfg.tol)
        all_ok &= out.converged
        fname = f"sweep-{tag}-{k:03d}.grid"
        save_grid_function(out.u, root / fname)
        rows.append({
            "index": k, "file": fname, "converged": out.converged,
            "iterations": out.iterations, "residual_norm": out.residual_norm,
            "constraint_violation_fraction": out.constraint_violation_fraction,
            "spectrum": list(prob.metadata["spectrum"]),
            "amplitude": prob.metadata["amplitude"],
        })
        print(f"sweep[{k}]: converged={out.converged} iters={out.iterations}")
    write_report(root / f"sweep-{tag}.json", {"instances": rows, "pass": all_ok}, tag)
    return 0 if all_ok else 1


def cmd_report(cfg: RunConfig) -> int:
    root = cfg.output_root()
    if not root.is_dir():
        print(f"no output directory at {root}", file=sys.stderr)
        return 2
    found = sorted(root.glob("*.json"))
    if not found:
        print(f"no reports under {root}", file=sys.stderr)
        return 2
    failures = 0
    for path in found:
        payload = read_report(path)
        status = payload.get("pass", None)
        if status is False:
            failures += 1
        print(f"{path.name}: pass={status}")
    return 0 if failures == 0 else 1


COMMANDS = {
    "spectral-fuzz": cmd_spectral_fuzz,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        file_vals = load_config_file(args.config) if getattr(args, "config", None) else {}
        cli_vals = {k: v for k, v in vars(args).items()
                    if k not in ("command", "config")}
        cfg = build_config(command, file_vals, cli_vals)
        return COMMANDS[command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
