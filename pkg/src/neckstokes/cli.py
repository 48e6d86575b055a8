"""Command-line front end.

Exit codes: 0 pass, 1 scientific or numerical failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import config as cfgmod
from .analysis import (InsufficientDataError, evaluate_sweep, run_epsilon)
from .geometry import NeckGeometry
from .mesh import ConfigurationError, audit_mesh
from .rigid import InteractionError, b_tilde, balance_residuals, solve_system
from .singular_fields import ALL_IDS, field_check_report
from .stokes import (IncompatibleDataError, SolverError, convergence_orders, export_probe_csv,
                     mms_errors)

log = logging.getLogger("neckstokes")

WORKERS_ENV = "NECKSTOKES_WORKERS"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _load_config(path):
    if path is None:
        return cfgmod.default()
    return cfgmod.load(path)


def _outdir(args, cfg=None) -> str:
    d = args.output_dir or (cfg.output_dir if cfg is not None else ".")
    os.makedirs(d, exist_ok=True)
    return d


# ----------------------------------------------------------------------
def fields_geometry(cfg: cfgmod.RunConfig) -> NeckGeometry:
    """Quadratic-model geometry matching the configured curvature at the neck."""
    g = dict(cfg.geometry)
    if g.get("profile") == "circle":
        g["kappa2"] = 1.0 / g.get("inclusion_radius", 1.0)
    g["profile"] = "quadratic"
    return NeckGeometry.from_dict(g)


def cmd_fields_check(args) -> int:
    cfg = _load_config(args.config)
    geom = fields_geometry(cfg)
    kappa2 = cfg.fields.get("kappa2")
    report = field_check_report(geom, kappa2, n_samples=cfg.fields.get("n_samples", 10_000))
    report["epsilon"] = geom.epsilon
    report["kappa2_geometry"] = geom.kappa2
    report["kappa2_fields"] = geom.kappa2 if kappa2 is None else kappa2
    _dump(report, os.path.join(_outdir(args, cfg), "fields_check.json"))
    for name in report["failures"]:
        print(f"FAIL {name}")
    print("fields check: " + ("pass" if report["passed"] else "fail"))
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_validate_solver(args) -> int:
    errs = mms_errors(levels=args.levels, n_boundary=args.n_boundary)
    orders = {k: convergence_orders(errs, k) for k in ("velocity_l2", "velocity_h1", "pressure_l2")}
    passed = min(orders["velocity_l2"]) >= 1.9 and min(orders["pressure_l2"]) >= 0.9
    _dump({"errors": errs, "orders": orders, "passed": passed},
          os.path.join(_outdir(args), "validate_solver.json"))
    for k, v in orders.items():
        print(f"{k}: " + " ".join(f"{o:.3f}" for o in v))
    print("solver validation: " + ("pass" if passed else "fail"))
    return EXIT_OK if passed else EXIT_FAIL


def probe_points(geom: NeckGeometry, n1: int = 21, n2: int = 5) -> np.ndarray:
    x1 = np.linspace(-geom.R, geom.R, n1)
    t = np.linspace(-0.4, 0.4, n2)
    X1, T = np.meshgrid(x1, t, indexing="ij")
    return np.column_stack([X1.ravel(), (T * geom.delta(X1)).ravel()])


def check_phi(cfg: cfgmod.RunConfig):
    div = cfgmod.phi_flux_density(cfg.phi)
    if abs(div) > 1e-12 * max(1.0, float(np.max(np.abs(cfg.phi.matrix)))):
        flux = div * math.pi * cfg.geometry.get("container_radius", 4.0) ** 2
        log.warning("phi has nonzero boundary flux %.6g; the Dirichlet problem is not solvable", flux)
        raise UsageError(f"refusing incompatible phi (flux {flux:.6g})")


def interaction_report(sol) -> dict:
    sysm = sol.system
    C = sysm.C
    scale = float(np.max(np.abs(C))) or 1.0
    bal = balance_residuals(sol)
    eig = np.linalg.eigvalsh(sysm.a)
    return {
        "epsilon": sol.geom.epsilon,
        "labels": [str(f) for f in ALL_IDS],
        "a": sysm.a, "b": sysm.b, "C": C,
        "b_tilde": b_tilde(sol), "q_R": sol.q_R,
        "diagnostics": sysm.diagnostics,
        "balance_residuals": {"volume": bal["volume"], "boundary": bal["boundary"],
                              "energy_scale": bal["energy_scale"]},
        "flags": {
            "a_symmetric_positive_definite": bool(sysm.diagnostics["asymmetry"] < 1e-10 and eig[0] > 0),
            "C1_1_plus_C2_1_zero": bool(abs(C[0] + C[3]) <= 1e-6 * scale),
            "C1_2_equals_C2_2": bool(abs(C[1] - C[4]) <= 1e-6 * scale),
            "C1_3_equals_C2_3": bool(abs(C[2] - C[5]) <= 1e-6 * scale),
        },
    }


def cmd_solve(args) -> int:
    cfg = _load_config(args.config)
    check_phi(cfg)
    geom = cfg.geom(args.epsilon)
    out = _outdir(args, cfg)
    mesh = cfg.mesh.build(geom)
    audit = audit_mesh(mesh, geom)
    tag = f"eps_{geom.epsilon!r}"
    mesh.export_text(os.path.join(out, f"{tag}_mesh.txt"))
    sol = solve_system(geom, mesh, cfg.phi)
    fields = {f"u{fid}": sol.fields[fid] for fid in ALL_IDS}
    fields["u0"] = sol.fields["u0"]
    fields["u"] = sol.total
    export_probe_csv(os.path.join(out, f"{tag}_fields.csv"), fields, probe_points(geom))
    rep = interaction_report(sol)
    rep["mesh_audit"] = audit
    rep["phi"] = {"name": cfg.phi.name, "matrix": cfg.phi.matrix, "offset": cfg.phi.offset}
    _dump(rep, os.path.join(out, f"{tag}_interaction.json"))
    for k, v in rep["flags"].items():
        print(f"{k}: {str(v).lower()}")
    ok = rep["flags"]["a_symmetric_positive_definite"] and audit["passed"]
    return EXIT_OK if ok else EXIT_FAIL


def _workers(n_tasks: int) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return max(1, min(n_tasks, os.cpu_count() or 1))
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{WORKERS_ENV} must be at least 1")
    return min(n, n_tasks)


def _run_one(task):
    geometry, eps, phi, mesh = task
    try:
        return eps, run_epsilon(geometry, eps, phi, mesh), None
    except (SolverError, InteractionError, ConfigurationError, ValueError) as exc:
        return eps, None, f"{type(exc).__name__}: {exc}"


def run_sweep(cfg: cfgmod.RunConfig, out: str, workers: int = 1):
    tasks = [(cfg.geometry, eps, cfg.phi, cfg.mesh) for eps in cfg.eps_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    results.sort(key=lambda r: -r[0])
    records, failures = [], {}
    for eps, rec, err in results:
        if err is None:
            records.append(rec)
            _dump(rec, os.path.join(out, f"eps_{eps!r}.json"))
        else:
            failures[repr(eps)] = err
    return records, failures


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    if args.quick:
        cfg = cfg.quick()
    if len(cfg.eps_list) < 3:
        raise UsageError("a sweep needs at least three epsilon values")
    check_phi(cfg)
    out = _outdir(args, cfg)
    records, failures = run_sweep(cfg, out, _workers(len(cfg.eps_list)))
    verdict = {"failures": failures, "criteria": {}}
    passed = not failures
    try:
        rep = evaluate_sweep(records, cfg.tolerances)
    except InsufficientDataError as exc:
        verdict["error"] = str(exc)
        passed = False
    else:
        rep.write_csv(os.path.join(out, "sweep.csv"))
        rep.write_gnuplot(os.path.join(out, "rates.dat"))
        verdict.update({"criteria": rep.verdicts, "fits": rep.fits, "extrapolation": rep.extrapolation})
        for cid, v in rep.verdicts.items():
            state = {True: "pass", False: "fail", None: "inconclusive"}[v["passed"]]
            print(f"criterion {cid}: {state}")
            passed = passed and v["passed"] is not False
    for eps, err in failures.items():
        print(f"epsilon {eps}: {err}")
    verdict["passed"] = passed
    _dump(verdict, os.path.join(out, "verdict.json"))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_report(args) -> int:
    from .plotting import render_report

    d = args.directory
    if args.output_dir and not os.path.isabs(d):
        d = os.path.join(args.output_dir, d)
    if not os.path.isfile(os.path.join(d, "sweep.csv")):
        raise UsageError(f"{d} has no sweep.csv; run the sweep command first")
    for p in render_report(d):
        print(p)
    vpath = os.path.join(d, "verdict.json")
    if os.path.isfile(vpath):
        with open(vpath) as fh:
            v = json.load(fh)
        for cid, c in v.get("criteria", {}).items():
            state = {True: "pass", False: "fail", None: "inconclusive"}[c["passed"]]
            print(f"criterion {cid}: {state}")
    return EXIT_OK


# ----------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="neckstokes", description="Stokes flow between nearly touching rigid inclusions.")
    p.add_argument("--output-dir", "-o", default=None, help="directory for all outputs")
    p.add_argument("--verbose", "-v", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fields", help="closed-form auxiliary fields")
    fsub = f.add_subparsers(dest="fields_command", required=True)
    fc = fsub.add_parser("check", help="run the field identity suite")
    fc.add_argument("--config", default=None)
    fc.set_defaults(func=cmd_fields_check)

    v = sub.add_parser("validate-solver", help="manufactured-solution convergence study")
    v.add_argument("--levels", type=int, default=3)
    v.add_argument("--n-boundary", type=int, default=16)
    v.set_defaults(func=cmd_validate_solver)

    s = sub.add_parser("solve", help="solve at one gap width")
    s.add_argument("--config", default=None)
    s.add_argument("--epsilon", type=float, required=True)
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="epsilon sweep with rate fits and verdicts")
    w.add_argument("--config", default=None)
    w.add_argument("--quick", action="store_true", help="three epsilon values on coarser meshes")
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="render figures for a sweep directory")
    r.add_argument("directory")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (cfgmod.ConfigError, UsageError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IncompatibleDataError, SolverError, InteractionError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
