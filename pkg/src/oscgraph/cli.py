"""Command line for multiplicity tables, resolvent solves, invariant suites and scans.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 failed
diagnostics or invariants, 5 ill-conditioned boundary system.
"""

from __future__ import annotations

import argparse
import math
import sys

from . import __version__
from .boundary import IllConditionedError, TruncationBox, invertibility_scan
from .config import ConfigError, RunConfig, load_config
from .multiplicity import RegimeTag, classify, format_multiplicity, mult_two_osc
from .params import BranchPointError, MuUndefinedError
from .report import render
from .resolvent import convergence_study, default_grid, resolve_circ, resolve_full

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_FAILED, EXIT_ILL = 0, 2, 3, 4, 5
SAMPLE_X = (-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0)


def _meta(cfg: RunConfig, command: str, **extra) -> dict:
    return {"command": command, "version": __version__, "config": cfg.resolved(), **extra}


def cmd_multiplicity(cfg: RunConfig):
    params = cfg.params
    regime = classify(params, cfg.force_regime)
    rows = [dict(lam=lam, regime=regime.tag.value, edge=regime.edge,
                 multiplicity=format_multiplicity(mult_two_osc(lam, params, cfg.force_regime)))
            for lam in cfg.lambda_grid()]
    return ["lam", "regime", "edge", "multiplicity"], rows, _meta(cfg, "multiplicity"), True


def _require_nonreal(cfg):
    if cfg.Lambda.imag == 0:
        raise ConfigError("Lambda must have a nonzero imaginary part")


def cmd_resolve(cfg: RunConfig):
    _require_nonreal(cfg)
    params, box = cfg.params, cfg.box
    grid = default_grid(params, cfg.Lambda, box, h=cfg.h)
    solver = resolve_circ if cfg.circ else resolve_full
    out = solver(params, cfg.Lambda, cfg.source_functions(), box, grid=grid, convergence_tol=math.inf)
    diag = dict(out.diagnostics)
    tol = cfg.tolerances
    diag["converged"] = bool(diag["box_doubling_change"] <= tol["convergence"])
    limits = {"ode_residual": tol["ode_residual"], "matching_residual": tol["matching_residual"],
              "solver_residual": tol["solver_residual"], "box_doubling_change": tol["convergence"]}
    if cfg.circ:
        limits["dirichlet_value"] = tol["dirichlet_value"]
    failed = sorted(k for k, lim in limits.items() if not diag[k] <= lim)
    diag["failed"] = ",".join(failed)
    rows = [dict(m=m, n=n, x=x, u_re=u.real, u_im=u.imag) for m, n, x, u in out.sample(SAMPLE_X)]
    meta = _meta(cfg, "resolve", diagnostics=diag)
    return ["m", "n", "x", "u_re", "u_im"], rows, meta, not failed


def cmd_verify(cfg: RunConfig, suite: str):
    from .verify import run_suite

    try:
        checks = run_suite(suite, cfg.params, cfg.Lambda, cfg.box)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = [c.as_dict() for c in checks]
    ok = all(c.passed for c in checks)
    meta = _meta(cfg, "verify", suite=suite, n_checks=len(checks), n_failed=sum(not c.passed for c in checks),
                 all_passed=ok)
    return ["suite", "name", "value", "threshold", "passed", "detail"], rows, meta, ok


def cmd_jacobi_scan(cfg: RunConfig):
    params = cfg.params
    if not params.coupled:
        raise ConfigError("the Jacobi scan needs both couplings positive")
    scan = invertibility_scan(params, cfg.taus, cfg.box)
    rows = scan.as_table()
    cols = ["tau", "sigma_min", "sigma_over_sqrt_tau", "imag_bound", "min_abs_im_p", "im_p_sign_definite"]
    meta = _meta(cfg, "jacobi-scan", fit={"slope": scan.slope, "intercept": scan.intercept, "c_fit": scan.c_fit})
    return cols, rows, meta, True


def cmd_convergence(cfg: RunConfig):
    _require_nonreal(cfg)
    rows = convergence_study(cfg.params, cfg.Lambda, cfg.source_functions(), cfg.boxes(), circ=cfg.circ)
    cols = ["m_max", "n_max", "change", "tail_norm", "boundary_norm", "monotone"]
    return cols, rows, _meta(cfg, "convergence"), True


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oscgraph", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"oscgraph {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("multiplicity", "resolve", "verify", "jacobi-scan", "convergence"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="key = value configuration file")
        s.add_argument("--out", help="output path (default: config 'output', else stdout)")
        s.add_argument("--format", choices=("csv", "json"))
        s.add_argument("--circ", action="store_true", default=None, help="add the Dirichlet condition at x = 0")
        s.add_argument("--box", help="truncation box MxN")
        s.add_argument("--force-regime", choices=[t.value for t in RegimeTag],
                       help="override the detected coupling regime")
        if name == "verify":
            s.add_argument("--suite", choices=("basis", "jacobi", "traceclass", "all"))
    return p


def _configure(args) -> RunConfig:
    cfg = load_config(args.config)
    box = TruncationBox.parse(args.box) if args.box else None
    return cfg.with_overrides(format=args.format, circ=args.circ, box=box, force_regime=args.force_regime,
                              output=args.out, suite=getattr(args, "suite", None))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _configure(args)
    except OSError as exc:
        print(f"oscgraph: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"oscgraph: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "multiplicity":
            cols, rows, meta, ok = cmd_multiplicity(cfg)
        elif args.command == "resolve":
            cols, rows, meta, ok = cmd_resolve(cfg)
        elif args.command == "verify":
            cols, rows, meta, ok = cmd_verify(cfg, cfg.suite)
        elif args.command == "jacobi-scan":
            cols, rows, meta, ok = cmd_jacobi_scan(cfg)
        else:
            cols, rows, meta, ok = cmd_convergence(cfg)
    except IllConditionedError as exc:
        print(f"oscgraph: {exc}", file=sys.stderr)
        return EXIT_ILL
    except (ConfigError, BranchPointError, MuUndefinedError) as exc:
        print(f"oscgraph: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    text = render(cfg.format, cols, rows, meta)
    try:
        if cfg.output:
            with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"oscgraph: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if ok else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
