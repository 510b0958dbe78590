"""Command line entry point: ``heatdyn spectrum|direct|inverse|verify --config FILE [--out DIR]``.

Exit codes: 0 when the report has no FAIL, 1 when it does, 2 for invalid
input or configuration, 3 when a numerical stage breaks down.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .direct import DirectProblem, DirectSolver, apriori_bound, boundary_residuals, time_function
from .errors import AssumptionViolation, InputError, NumericalFailure
from .expansion import SampledFunction
from .fdm import FdmScheme, solve_fdm
from .inverse import InverseProblem, solve_inverse, synthesize_energy, uniform_grid
from .io import RunConfig, has_failure, load_config, write_csv, write_json
from .spectral import characteristic_residual, compute_modes

log = logging.getLogger("heatdyn")

LOG_ENV = ("HEATDYN_LOG", "TOOL_LOG")
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class Run:
    """Mutable run context; ``stage`` names the step reported on failure."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.stage = "setup"


def _setup_logging():
    level = "warn"
    for key in LOG_ENV:
        if os.environ.get(key):
            level = os.environ[key].strip().lower()
            break
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def _long_format(x, t, values):
    """Columns (x, t, u) with x varying fastest."""
    xx, tt = np.meshgrid(x, t, indexing="xy")
    return xx.ravel(), tt.ravel(), values.T.ravel()


def _direct_problem(cfg: RunConfig, p=None) -> DirectProblem:
    return DirectProblem(
        cfg.spectral,
        cfg.function("p", "t") if p is None else p,
        cfg.function("f", "xt") if cfg.f is not None else None,
        cfg.function("phi", "x"),
        float(cfg.T),
        cfg.n0,
    )


def run_spectrum(run: Run) -> dict:
    cfg = run.cfg
    run.stage = "spectrum"
    modes = compute_modes(cfg.spectral, cfg.count)
    residuals = [characteristic_residual(cfg.spectral, m.mu) for m in modes if m.kind.name == "SIN"]
    lam = np.array([float(m.lam) for m in modes])
    write_csv(
        run.out / "modes.csv",
        ("n", "mu", "lambda", "norm_sq", "integral"),
        (
            [m.index for m in modes],
            [float(m.mu) for m in modes],
            lam,
            [m.norm_sq for m in modes],
            [m.integral for m in modes],
        ),
    )
    worst = max((abs(r) for r in residuals), default=0.0)
    return {
        "mode": "SPECTRUM",
        "regime": cfg.spectral.regime.name,
        "count": len(modes),
        "residual": {"value": worst, "tol": 1e-10, "status": "PASS" if worst < 1e-10 else "FAIL"},
        "ordering": {"status": "PASS" if np.all(np.diff(lam) > 0) else "FAIL"},
    }


def run_direct(run: Run) -> dict:
    cfg = run.cfg
    run.stage = "direct.data"
    problem = _direct_problem(cfg)
    x = np.linspace(0.0, 1.0, cfg.nx + 1)
    t = np.linspace(0.0, cfg.T, cfg.nt + 1)
    run.stage = "direct.solve"
    solver = DirectSolver(cfg.spectral, cfg.truncation, cfg.n0)
    field = solver.solve(problem, x, t, policy=cfg.policy)
    _, Ep = synthesize_energy(problem, t, cfg.truncation)
    run.stage = "direct.write"
    write_csv(run.out / "u.csv", ("x", "t", "u"), _long_format(x, t, field.values))
    write_csv(run.out / "energy.csv", ("t", "E"), (t, field.energy()))
    write_csv(run.out / "energy_deriv.csv", ("t", "dE"), (t, Ep))
    report = {"mode": "DIRECT", **field.metadata}
    report["boundary_residuals"] = boundary_residuals(field, cfg.spectral, problem)
    try:
        report["apriori_bound"] = apriori_bound(field, problem)
    except InputError as exc:
        report["apriori_bound"] = {"status": "WARN", "message": str(exc)}
    return report


def run_inverse(run: Run) -> dict:
    cfg = run.cfg
    run.stage = "inverse.data"
    problem = InverseProblem(
        cfg.spectral,
        cfg.function("f", "xt") if cfg.f is not None else None,
        cfg.function("phi", "x"),
        cfg.function("E", "t"),
        float(cfg.T),
        cfg.n0,
        E_deriv=cfg.function("E_deriv", "t"),
    )
    run.stage = "inverse.solve"
    res = solve_inverse(
        problem,
        nodes=cfg.nodes,
        truncation=cfg.truncation,
        method=cfg.method,
        override=cfg.override,
        closure_tol=cfg.tolerance("closure", 1e-4),
        x_grid=np.linspace(0.0, 1.0, cfg.nx + 1),
        picard_tol=cfg.tolerance("picard", 1e-15),
    )
    run.stage = "inverse.write"
    write_csv(run.out / "p.csv", ("t", "p"), (res.t, res.p))
    write_csv(run.out / "q.csv", ("t", "q"), (res.t, res.q))
    u = res.field
    write_csv(run.out / "u.csv", ("x", "t", "u"), _long_format(u.x_grid, u.t_grid, u.values))
    return {"mode": "INVERSE", **res.report}


def run_verify(run: Run) -> dict:
    cfg = run.cfg
    run.stage = "verify.data"
    problem = _direct_problem(cfg)
    scheme = FdmScheme(cfg.fdm["nx"], cfg.fdm["nt"], float(cfg.fdm["theta"]))
    run.stage = "verify.fdm"
    store = max(1, scheme.nt // 100)
    ref = solve_fdm(problem, scheme, store_every=store)
    run.stage = "verify.series"
    series = DirectSolver(cfg.spectral, cfg.truncation, cfg.n0).solve(problem, ref.x_grid, ref.t_grid, policy=cfg.policy)
    scale = max(ref.sup_norm(), 1e-300)
    rel = float(np.max(np.abs(series.values - ref.values)) / scale)
    tol_fdm = cfg.tolerance("verify_fdm", 1e-3)
    report = {
        "mode": "VERIFY",
        "series_vs_fdm": {"relative_sup": rel, "tol": tol_fdm, "status": "PASS" if rel <= tol_fdm else "FAIL"},
    }
    run.stage = "verify.inverse"
    t = uniform_grid(cfg.T, cfg.nodes)
    E, Ep = synthesize_energy(problem, t, cfg.truncation)
    inv = InverseProblem(cfg.spectral, problem.f, problem.phi, SampledFunction(t, E), problem.T, cfg.n0, SampledFunction(t, Ep))
    tol_inv = cfg.tolerance("verify_inverse", 1e-2)
    try:
        res = solve_inverse(inv, nodes=cfg.nodes, truncation=cfg.truncation, x_grid=np.linspace(0, 1, cfg.nx + 1))
    except AssumptionViolation as exc:
        report["closed_loop"] = {"status": "FAIL", "tag": exc.tag, "message": str(exc)}
    else:
        err = float(np.max(np.abs(res.p - time_function(problem.p)(res.t))))
        report["closed_loop"] = {
            "p_error": err,
            "tol": tol_inv,
            "status": "PASS" if err <= tol_inv else "FAIL",
            "closure": res.report["closure"],
            "picard_agreement": res.report["picard"]["agreement"],
        }
    return report


RUNNERS = {"spectrum": run_spectrum, "direct": run_direct, "inverse": run_inverse, "verify": run_verify}
REPORT_NAME = {"verify": "verify.json"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heatdyn", description="Heat equation with a dynamic boundary condition: direct and inverse solvers")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default=None, help="output directory (default: config 'out' or current directory)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging()
    stage = "config"
    try:
        cfg = load_config(args.config).require(args.command)
        out = Path(args.out or cfg.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        run = Run(cfg, out)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            try:
                report = RUNNERS[args.command](run)
            finally:
                stage = run.stage
        report["config"] = cfg.raw
        write_json(out / REPORT_NAME.get(args.command, "report.json"), report)
    except InputError as exc:
        print(f"heatdyn: {stage} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"heatdyn: {stage} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    if has_failure(report):
        log.error("report contains FAIL entries")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
