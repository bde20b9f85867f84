"""Command-line front end: check, barrier, solve, exhaust, props."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .barrier import (BarrierGrid, DomainTooSmallError, SolvabilityConditionError, certification_points, certify,
                      choose_delta, compute_barrier_config, estimate_diagnostics, lambda_of,
                      solvability_rhs, supersolution_ratio)
from .config import ConfigError, RunConfig, load_config
from .experiment import choose_L, envelope_check, run_exhaustion
from .geometry import check_assumptions, phi1_of_C1
from .grid import PolarGrid
from .operators import validate_growth
from .props import run_battery
from .solver import solve_dirichlet

OK, FAILED, USAGE = 0, 1, 2
GROWTH_LATTICE = np.logspace(-6, 6, 241)


def derived_constants(cfg: RunConfig) -> dict:
    prof = cfg.profile
    phi1 = phi1_of_C1(prof.C1)
    out = {"profile": prof.to_dict(), "phi1": phi1, "n": cfg.n, "B0": cfg.spec.B0,
           "solvability_rhs": solvability_rhs(phi1, cfg.n)}
    try:
        delta = choose_delta(phi1, prof.C4, cfg.n, cfg.spec.B0)
        out.update(delta=delta, **{"lambda": lambda_of(delta, phi1, cfg.n)})
    except SolvabilityConditionError:
        out.update(delta=None, **{"lambda": None})
    return out


def manifest(cfg: RunConfig, command: str, args, extra: dict | None = None) -> dict:
    m = {"command": command, "config": cfg.raw, "config_path": cfg.source, "seed": args.seed_value,
         "threads": args.threads, "versions": io.versions(), "derived": derived_constants(cfg)}
    m.update(extra or {})
    return m


def _out_dir(args, cfg: RunConfig, command: str) -> Path:
    return Path(args.out or cfg.out or Path("runs") / command)


# ---------------------------------------------------------------------------
# commands


def cmd_check(cfg: RunConfig, args) -> int:
    ck = cfg.raw.get("check", {})
    rep = check_assumptions(cfg.profile, cfg.warp(), sample_count=int(ck.get("sample_count", 1000)),
                            tail_tol=float(ck.get("tail_tol", 1e-3)), t_max=ck.get("t_max"))
    growth = validate_growth(cfg.spec, GROWTH_LATTICE)
    phi1 = phi1_of_C1(cfg.profile.C1)
    rhs = solvability_rhs(phi1, cfg.n)
    solv = {"B0": cfg.spec.B0, "rhs": rhs, "phi1": phi1, "n": cfg.n, "passed": bool(cfg.spec.B0 < rhs)}
    passed = rep.passed and growth.passed and solv["passed"]
    report = {"passed": passed, "assumptions": rep.to_dict(), "growth": growth.to_dict(), "solvability": solv,
              "operator": cfg.spec.to_dict()}
    out = _out_dir(args, cfg, "check")
    io.write_json(out / "check.json", report)
    io.write_json(out / "manifest.json", manifest(cfg, "check", args))
    for v in rep.verdicts:
        print(f"{v.name}: {'pass' if v.passed else 'FAIL'}")
    print(f"solvability B0 = {cfg.spec.B0:g} < {rhs:g}: {'pass' if solv['passed'] else 'FAIL'}")
    return OK if passed else FAILED


def _barrier_for(cfg: RunConfig, r_max: float | None = None):
    b = cfg.raw["barrier"]
    ex = cfg.raw["experiment"]
    theta0 = float(b.get("theta0", ex["theta0"]))
    L = float(b["L"]) if "L" in b else choose_L(cfg.f, float(ex["eps"]), theta0)
    surf = cfg.surface()
    rm = float(b.get("r_max", r_max if r_max is not None else min(cfg.R_max, 16.0)))
    grid = BarrierGrid(surf, int(b["nr"]), int(b["ntheta"]), rm, b["mapping"], float(b["scale"]))
    bc = compute_barrier_config(cfg.profile, cfg.warp(), cfg.spec, cfg.n, L, grid, theta0=theta0,
                                amplitude=float(b["amplitude"]))
    return bc, surf


def cmd_barrier(cfg: RunConfig, args) -> int:
    out = _out_dir(args, cfg, "barrier")
    b = cfg.raw["barrier"]
    try:
        bc, surf = _barrier_for(cfg)
    except (DomainTooSmallError, SolvabilityConditionError) as exc:
        io.write_json(out / "barrier.json", {"passed": False, "error": str(exc)})
        io.write_json(out / "manifest.json", manifest(cfg, "barrier", args))
        print(f"barrier construction failed: {exc}")
        return FAILED
    seed = args.seed_value
    n_random = int(b["n_random"])
    cert = certify(bc, cfg.spec, surf, n_random=n_random, seed=seed)
    r, t, _ = certification_points(bc, bc.h_field.grid, n_random, seed)
    diag = estimate_diagnostics(bc, bc.h_field, cfg.warp(), surf, (r, t), cfg.spec)
    ratio = supersolution_ratio(r, t, bc, bc.h_field, cfg.spec, surf)
    cols = {"r": r, "theta": t, "ratio": ratio}
    cols.update({k: v for k, v in diag.pop("values").items()})
    io.write_table_csv(out / "diagnostics.csv", cols)
    failed = [k for k, v in bc.conditions.items() if not v["passed"]]
    if not cert.passed:
        failed.append("supersolution_ratio" if cert.sign_passed else "sign_certificates")
    report = {"passed": cert.passed and not failed, "config": bc.to_dict(), "certification": cert.to_dict(),
              "diagnostics": diag, "failed": failed}
    io.write_json(out / "barrier.json", report)
    io.write_json(out / "manifest.json", manifest(cfg, "barrier", args, {"grid": bc.grid.to_dict()}))
    print(f"R4 = {bc.R4:.6g}, delta = {bc.delta:.6g}, samples = {cert.samples}, ratio max = {cert.ratio_max:.3e}")
    if failed:
        print("failed: " + ", ".join(failed))
        return FAILED
    return OK


def cmd_solve(cfg: RunConfig, args) -> int:
    out = _out_dir(args, cfg, "solve")
    s = cfg.raw["solver"]
    grid = PolarGrid.disk(int(s["nr"]), int(s["ntheta"]), float(s["R"]))
    u, rep = solve_dirichlet(grid, cfg.surface(), cfg.spec, cfg.f, cfg.solver)
    (out / "fields").mkdir(parents=True, exist_ok=True)
    name = "fields/" + io.field_name(grid.R)
    u.to_csv(out / name, name="u")
    io.write_json(out / "solve.json", rep.to_dict())
    io.write_json(out / "manifest.json", manifest(cfg, "solve", args, {"grid": grid.to_dict(), "fields": [name]}))
    print(f"converged = {rep.converged}, iterations = {rep.iterations}, residual = {rep.residual:.3e}")
    return OK if rep.converged else FAILED


def cmd_exhaust(cfg: RunConfig, args) -> int:
    out = _out_dir(args, cfg, "exhaust")
    ex = cfg.raw["experiment"]
    run = run_exhaustion(cfg.surface(), cfg.spec, cfg.f, ex["schedule"], cfg.solver, dr=float(ex["dr"]),
                         ntheta=int(ex["ntheta"]), compacts=ex["compacts"], workers=args.threads)
    status = FAILED if run.partial else OK
    extra = {}
    if ex["envelope"] and not run.partial:
        try:
            bc, _ = _barrier_for(cfg, r_max=min(cfg.R_max, run.schedule[-1] + 1.0))
            run.envelope = envelope_check(run, float(ex["theta0"]), float(ex["eps"]), bc, f=cfg.f)
            extra["barrier"] = bc.to_dict()
            if run.envelope["violations"]:
                status = FAILED
        except (DomainTooSmallError, SolvabilityConditionError) as exc:
            run.envelope = {"error": str(exc)}
            status = FAILED
    fields = []
    for u in run.solutions:
        name = "fields/" + io.field_name(u.grid.R)
        (out / "fields").mkdir(parents=True, exist_ok=True)
        u.to_csv(out / name, name="u")
        fields.append(name)
    io.write_json(out / "metrics.json", run.metrics())
    io.write_json(out / "manifest.json", manifest(cfg, "exhaust", args, {"fields": fields, **extra}))
    d2 = run.differences.get(2.0, [])
    print(f"d on B(o,2): {', '.join(f'{x:.3e}' for x in d2)}; attainment: "
          f"{', '.join(f'{x:.3e}' for x in run.attainment)}")
    return status


def cmd_props(cfg: RunConfig, args) -> int:
    out = _out_dir(args, cfg, "props")
    p = cfg.raw["props"]
    rep = run_battery(cfg.surface(), cfg.spec, cfg.profile, args.seed_value, pairs=int(p["pairs"]), nr=int(p["nr"]),
                      ntheta=int(p["ntheta"]), R=float(p["R"]), modes=int(p["modes"]), shift=float(p["shift"]),
                      params=cfg.solver, workers=args.threads)
    io.write_json(out / "props.json", rep)
    io.write_json(out / "manifest.json", manifest(cfg, "props", args))
    for name, s in rep["suites"].items():
        print(f"{name}: {'pass' if s['passed'] else 'FAIL'}")
    return OK if rep["passed"] else FAILED


COMMANDS = {"check": cmd_check, "barrier": cmd_barrier, "solve": cmd_solve, "exhaust": cmd_exhaust,
            "props": cmd_props}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dirinf", description="Barriers and exhaustion on model surfaces")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path, help="TOML run configuration")
    parser.add_argument("--out", type=Path, default=None, help="output directory (default: config 'out')")
    parser.add_argument("--threads", type=int, default=None, help="maximum worker threads (default: config 'threads' or 1)")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    if args.threads is not None and args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return USAGE
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE
    if args.threads is None:
        args.threads = cfg.raw.get("threads", 1)
        if not isinstance(args.threads, int) or isinstance(args.threads, bool) or args.threads < 1:
            print("config error: threads must be a positive integer", file=sys.stderr)
            return USAGE
    args.seed_value = cfg.seed if args.seed is None else int(args.seed)
    return COMMANDS[args.command](cfg, args)


if __name__ == "__main__":
    sys.exit(main())
