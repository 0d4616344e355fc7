"""Command-line interface.

    nse-mdp <subcommand> --config <file> --out <dir> [--seed N]

Subcommands: verify-core, simulate, skeleton, rate, thm35, prop33, prop36,
mdp-tail, report-data.  Exit codes: 0 on pass, 1 on a verdict failure,
2 on usage or configuration errors.  All outputs land under --out.
"""

from __future__ import annotations

import argparse
import glob
import json
import math
import os
import sys

import numpy as np

from .config import ConfigError, ExperimentConfig
from .dynamics import solve_nse, solve_skeleton
from .experiments import (
    CsvRow,
    RunRecord,
    persist,
    run_estimates_suite,
    run_mdp_tail,
    run_prop33,
    run_prop36,
    run_thm35,
)
from .noise import cost_LT
from .rate import RateNotConvergedError, SkeletonOperator, rate_terminal
from .snapshots import read_trajectory, write_trajectory
from .spectral import h_norm_sq_coeffs, v_norm_sq_coeffs
from .stochastic import run_jump_ensemble


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config \
        else ExperimentConfig.defaults()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.override("ensemble", "seed", args.seed)
    return cfg


def _print_record(record: RunRecord):
    for name, verdict in record.verdicts.items():
        print(f"  [{verdict.upper():5s}] {name}")
    print(f"{record.experiment}: "
          f"{'PASS' if record.passed else 'FAIL'} "
          f"({record.wall_clock:.1f} s)")


def _run_experiment(runner, args) -> int:
    cfg = _load_config(args)
    record = runner(cfg)
    persist(record, args.out, cfg)
    _print_record(record)
    return 0 if record.passed else 1


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    basis = cfg.basis()
    grid = cfg.grid()
    u0 = cfg.u0(basis)
    noise = cfg.noise(basis)
    seed = cfg.get("ensemble", "seed")
    os.makedirs(os.path.join(args.out, "trajectories"), exist_ok=True)
    rows = []
    jump_summary = {}
    for idx, sc in enumerate(cfg.scalings()):
        res = run_jump_ensemble(sc, u0, noise, grid, seed, replicas=1,
                                collect_trajectories=True,
                                event_budget=cfg.get("run", "event_budget"))
        traj = res.trajectories[0]
        path = os.path.join(args.out, "trajectories", f"u_eps_{idx}.bin")
        write_trajectory(path, traj)
        rows.append(CsvRow(sc.eps, sc.a, 1, "terminal_h",
                           math.sqrt(h_norm_sq_coeffs(basis, traj[-1].coeffs)),
                           0.0, 0.0, "info"))
        rows.append(CsvRow(sc.eps, sc.a, 1, "sup_h2", float(res.sup_h2[0]),
                           0.0, 0.0, "info"))
        rows.append(CsvRow(sc.eps, sc.a, 1, "total_jumps",
                           float(res.total_jumps[0]), 0.0, 0.0, "info"))
        jump_summary[repr(sc.eps)] = int(res.total_jumps[0])
    record = RunRecord("simulate", cfg.config_hash(), rows, {},
                       diagnostics={"jumps_per_eps": jump_summary, "seed": seed})
    persist(record, args.out, cfg)
    print(f"simulate: wrote {len(jump_summary)} trajectories under {args.out}")
    return 0


def _cmd_skeleton(args) -> int:
    cfg = _load_config(args)
    basis = cfg.basis()
    grid = cfg.grid()
    noise = cfg.noise(basis)
    u0_traj = solve_nse(cfg.u0(basis), noise.f, grid,
                        energy_cap=cfg.get("initial", "energy_cap"))
    psi = cfg.psi_values(grid)
    eta = solve_skeleton(psi, u0_traj, noise, grid)
    os.makedirs(os.path.join(args.out, "trajectories"), exist_ok=True)
    write_trajectory(os.path.join(args.out, "trajectories", "u0.bin"), u0_traj)
    write_trajectory(os.path.join(args.out, "trajectories", "skeleton.bin"), eta)
    rows = [CsvRow(0.0, 0.0, 1, "skeleton_terminal_h",
                   math.sqrt(h_norm_sq_coeffs(basis, eta[-1].coeffs)),
                   0.0, 0.0, "info"),
            CsvRow(0.0, 0.0, 1, "skeleton_terminal_v",
                   math.sqrt(v_norm_sq_coeffs(basis, eta[-1].coeffs)),
                   0.0, 0.0, "info")]
    record = RunRecord("skeleton", cfg.config_hash(), rows, {})
    persist(record, args.out, cfg)
    print(f"skeleton: wrote u0.bin and skeleton.bin under {args.out}")
    return 0


def _cmd_rate(args) -> int:
    cfg = _load_config(args)
    basis = cfg.basis()
    grid = cfg.grid()
    noise = cfg.noise(basis)
    u0_traj = solve_nse(cfg.u0(basis), noise.f, grid,
                        energy_cap=cfg.get("initial", "energy_cap"))
    if args.target:
        snap = read_trajectory(args.target)
        if snap.basis.N != basis.N:
            print(f"error: target snapshot has N={snap.basis.N}, config has "
                  f"N={basis.N}", file=sys.stderr)
            return 2
        target = snap[-1]
    else:
        target = solve_skeleton(cfg.psi_values(grid), u0_traj, noise, grid)[-1]
    op = SkeletonOperator(u0_traj, noise, grid)
    tol = cfg.get("tail", "rate_tol")
    try:
        res = rate_terminal(op, target, tol=tol,
                            max_iter=cfg.get("tail", "rate_max_iter"),
                            mu=cfg.get("tail", "tikhonov_mu"))
        failed = False
    except RateNotConvergedError as err:
        res = err.result
        failed = True
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "rate_result.json"), "w") as fh:
        json.dump({"I": res.I, "residual": res.residual,
                   "iterations": res.iterations, "converged": res.converged,
                   "regularized": res.regularized,
                   "config_hash": cfg.config_hash()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    import csv as _csv
    with open(os.path.join(args.out, "psi_star.csv"), "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["mark_index", "step", "value"])
        vals = res.psi_star.values
        for i in range(vals.shape[0]):
            for n in range(vals.shape[1]):
                w.writerow([i, n, repr(float(vals[i, n]))])
    # the optimal tilt's entropic cost per a^2 approaches I as a -> 0
    a_link = 1e-3
    phi = 1.0 + a_link * res.psi_star.values
    if np.all(phi >= 0):
        cost = cost_LT(phi, noise.marks, grid) / a_link ** 2
        print(f"rate: I = {res.I:.6g}  (cost check L_T(1+a psi*)/a^2 = {cost:.6g})")
    else:
        print(f"rate: I = {res.I:.6g}")
    print(f"rate: residual = {res.residual:.3g}, iterations = {res.iterations}")
    return 1 if failed else 0


def _cmd_report_data(args) -> int:
    results = sorted(glob.glob(os.path.join(args.indir, "*_manifest.json")))
    if not results:
        print(f"error: no experiment manifests found in {args.indir}",
              file=sys.stderr)
        return 2
    entries = []
    hashes = set()
    for mpath in results:
        with open(mpath) as fh:
            manifest = json.load(fh)
        name = manifest["experiment"].replace("-", "_")
        csv_path = mpath.replace("_manifest.json", ".csv")
        if not os.path.exists(csv_path):
            print(f"error: {csv_path} missing for {mpath}", file=sys.stderr)
            return 2
        hashes.add(manifest["config_hash"])
        entries.append({"experiment": manifest["experiment"],
                        "csv": os.path.basename(csv_path),
                        "manifest": os.path.basename(mpath),
                        "verdicts": manifest.get("verdicts", {})})
    if len(hashes) > 1:
        print(f"error: inconsistent config hashes in {args.indir}: "
              f"{sorted(hashes)}", file=sys.stderr)
        return 2
    index = {"config_hash": hashes.pop(), "experiments": entries,
             "trajectories": sorted(
                 os.path.basename(p) for p in
                 glob.glob(os.path.join(args.indir, "trajectories", "*.bin")))}
    out = os.path.join(args.indir, "index.json")
    with open(out, "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"report-data: indexed {len(entries)} experiment(s) -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nse-mdp",
        description="Jump-noise Navier-Stokes simulation and moderate-deviation "
                    "verification toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="config file (defaults used if omitted)")
        if out:
            sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, help="override the config seed")

    common(sub.add_parser("verify-core", help="run the operator identity suite"))
    common(sub.add_parser("simulate", help="simulate one jump trajectory per eps"))
    common(sub.add_parser("skeleton", help="solve the deterministic and skeleton equations"))
    sp = sub.add_parser("rate", help="least-norm rate of a terminal state")
    common(sp)
    sp.add_argument("--target", help="trajectory snapshot whose terminal state is the target")
    common(sub.add_parser("thm35", help="controlled-process convergence sweep"))
    common(sub.add_parser("prop33", help="skeleton-map weak-continuity sweep"))
    common(sub.add_parser("prop36", help="moderate-process convergence sweep"))
    common(sub.add_parser("mdp-tail", help="tail-exponent vs rate-function comparison"))
    sp = sub.add_parser("report-data", help="index persisted experiment outputs")
    sp.add_argument("--in", dest="indir", required=True, help="results directory")
    return p


def cli_dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0,) else 0
    try:
        if args.command == "verify-core":
            return _run_experiment(run_estimates_suite, args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "skeleton":
            return _cmd_skeleton(args)
        if args.command == "rate":
            return _cmd_rate(args)
        if args.command == "thm35":
            return _run_experiment(run_thm35, args)
        if args.command == "prop33":
            return _run_experiment(run_prop33, args)
        if args.command == "prop36":
            return _run_experiment(run_prop36, args)
        if args.command == "mdp-tail":
            return _run_experiment(run_mdp_tail, args)
        if args.command == "report-data":
            return _cmd_report_data(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser.print_usage(sys.stderr)
    return 2


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
