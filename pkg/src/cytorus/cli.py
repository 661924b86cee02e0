"""Command line entry point ``cy``.

Exit codes: 0 success, 1 unexpected solver error, 2 configuration or file
error, 3 continuation step underflow, 4 a monitor or suite check failed.
"""

from __future__ import annotations

import argparse
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import load_config
from .continuity import ContinuationOptions, continuity_solve, problem_at
from .elliptic import SolveOptions
from .errors import ConfigError, CYError, FieldFileError, SliceRequired, StepUnderflow
from .estimates import (
    estimate_report,
    pointwise_identity_scan,
    second_order_monitor,
    solution_residual,
    wedge_positivity,
)
from .fields import ACSField, synthetic_J
from .grid import TorusGrid
from .io import (
    emit_heatmap,
    file_sha256,
    read_field,
    write_csv,
    write_field,
    write_manifest,
)
from .operator import F_op, MAProblem, taming_margin
from .problems import builtin_problem, eval_expression
from .suites import atlas_suite, check, deformation_suite, identities_suite

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_UNDERFLOW, EXIT_MONITOR = 0, 1, 2, 3, 4


# ---------------------------------------------------------------- problem setup


def build_problem(cfg):
    """``(problem, phi_star or None)`` from the ``problem.*`` keys."""
    src = cfg["problem.f"]
    kind, _, arg = src.partition(":")
    n, m, scheme, seed = cfg["problem.n"], cfg["problem.m"], cfg["problem.scheme"], cfg["problem.seed"]
    try:
        if kind == "builtin":
            return builtin_problem(arg.strip(), n, m, scheme, seed,
                                   cfg["problem.J"], cfg["problem.J_amplitude"])
        grid = TorusGrid(n, m, scheme)
        if kind == "file":
            vals, fn, fm, deg = read_field(cfg.resolve(arg.strip()))
            if (fn, fm, deg) != (n, m, 0):
                raise ConfigError(f"f file holds n={fn}, m={fm}, degree={deg}; "
                                  f"config asks for n={n}, m={m}")
            f = vals
        elif kind == "expr":
            f = eval_expression(arg, grid)
        else:
            raise ConfigError(f"problem.f must start with builtin:, file: or expr:, got {src!r}")
        if cfg["problem.J"] == "standard":
            J = ACSField.standard(grid)
        elif cfg["problem.J"] == "synthetic":
            J = synthetic_J(grid, np.random.default_rng(seed + 1000),
                            amplitude=cfg["problem.J_amplitude"])
        else:
            raise ConfigError(f"unknown problem.J {cfg['problem.J']!r}")
        return MAProblem(grid, J, f), None
    except FieldFileError:
        raise
    except (ConfigError, CYError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def solver_options(cfg):
    return ContinuationOptions(
        s_step_init=cfg["solver.s_step_init"],
        s_step_min=cfg["solver.s_step_min"],
        newton_tol=cfg["solver.newton_tol"],
        newton_max=cfg["solver.newton_max"],
        linear=SolveOptions(tol_rel=cfg["solver.linear_tol"],
                            preconditioner=cfg["solver.preconditioner"],
                            restart=cfg["solver.restart"]),
    )


def versions():
    return {"cytorus": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def print_table(title, summary, stream=None):
    stream = stream or sys.stdout
    print(f"{title}", file=stream)
    width = max([len(k) for k in summary] + [5])
    for name, c in summary.items():
        flag = "PASS" if c["pass"] else "FAIL"
        print(f"  {name:<{width}}  {flag}  value={c['value']:.3e}  limit={c['limit']:.3e}",
              file=stream)


def finish(cmd, cfg, out, summary, files, t0, extra=None):
    hashed = {
        "command": cmd,
        "config": {k: v for k, v in cfg.echo().items() if k != "output.dir"},
        "versions": versions(),
        "checks": summary,
        "all_pass": all(c["pass"] for c in summary.values()),
        "files": {name: file_sha256(out / name) for name in sorted(files)},
    }
    if extra:
        hashed.update(extra)
    unhashed = {"wall_clock_s": time.time() - t0, "out_dir": str(out),
                "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(t0)),
                "threads": os.environ.get("CY_THREADS", "1")}
    write_manifest(out / "manifest.json", hashed, unhashed)
    print_table(f"{cmd}: {'PASS' if hashed['all_pass'] else 'FAIL'}", summary)
    return EXIT_OK if hashed["all_pass"] else EXIT_MONITOR


# ---------------------------------------------------------------------- commands


def cmd_solve(cfg, out: Path, log=None) -> int:
    t0 = time.time()
    prob, phi_star = build_problem(cfg)
    grid = prob.grid
    try:
        res = continuity_solve(prob, solver_options(cfg), keep_states=True, log=log)
    except StepUnderflow as exc:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "trace.csv", _trace_header(), _trace_rows(exc.trace))
        print(f"solve: step underflow: {exc}", file=sys.stderr)
        return EXIT_UNDERFLOW
    out.mkdir(parents=True, exist_ok=True)
    write_field(out / "phi.cyfd", res.phi, grid.n, grid.m)
    write_csv(out / "trace.csv", _trace_header(), _trace_rows(res.trace))
    files = ["phi.cyfd", "trace.csv"]
    summary = {}
    recs = res.trace.records
    if cfg["monitors.conservation"]:
        summary["mass"] = check(max(r.mass_defect for r in recs), cfg["monitors.mass_tol"])
        summary["mean_phi"] = check(max(r.mean_phi for r in recs), cfg["monitors.mean_tol"])
    if cfg["monitors.identities"] or cfg["monitors.estimates"]:
        prod, dan, lbd, gmin = 0.0, 0.0, -np.inf, np.inf
        rows = []
        for s, phi in res.states:
            ps = problem_at(prob, s)
            if cfg["monitors.estimates"]:
                rep = estimate_report(phi, ps)
                rows.append({"s": s, **rep.row()})
                pw, so, gm = rep.pointwise, rep.second_order, rep.wedge["G_min"]
            else:
                pw = pointwise_identity_scan(phi, ps)
                so = second_order_monitor(phi, ps)
                gm = wedge_positivity(phi, ps)
            prod = max(prod, pw.get("product", np.inf))
            dan = max(dan, pw.get("da_norm", np.inf))
            lbd = max(lbd, so["laplacian_bound_defect"])
            gmin = min(gmin, min(gm))
        if cfg["monitors.identities"]:
            summary["product_identity"] = check(prod, cfg["monitors.identity_tol"])
            summary["norm_identity"] = check(dan, cfg["monitors.identity_tol"])
            summary["laplacian_bound"] = check(lbd, cfg["monitors.laplacian_bound_tol"])
            summary["wedge_positivity"] = check(-gmin, cfg["monitors.wedge_tol"])
        if rows:
            header = list(rows[-1].keys())
            write_csv(out / "estimates.csv", header, [[r.get(h, "") for h in header] for r in rows])
            files.append("estimates.csv")
    extra = {"residual_inf": recs[-1].residual_inf if recs else 0.0, "steps": len(recs)}
    if phi_star is not None:
        err = float(np.abs(res.phi - phi_star).max() / max(np.abs(phi_star).max(), 1e-300))
        summary["recovery"] = check(err, cfg["monitors.recovery_tol"])
        extra["recovery_error"] = err
    return finish("solve", cfg, out, summary, files, t0, extra)


def _trace_header():
    from .continuity import TRACE_COLUMNS
    return list(TRACE_COLUMNS) + ["mass_defect", "mean_phi"]


def _trace_rows(trace):
    return [[getattr(r, c) for c in _trace_header()] for r in trace.records]


def _load_state(cfg, field_arg):
    path = field_arg or cfg["verify.field"]
    if not path:
        raise ConfigError("no field file given (use --field or verify.field)")
    vals, n, m, deg = read_field(cfg.resolve(path) if not field_arg else Path(path))
    if deg != 0 or vals.ndim != 2 * n:
        raise FieldFileError("expected a scalar field file")
    return vals


def cmd_verify(cfg, out: Path, field_arg=None) -> int:
    t0 = time.time()
    phi = _load_state(cfg, field_arg)
    prob, phi_star = build_problem(cfg)
    if phi.shape != prob.grid.shape:
        raise FieldFileError(f"field shape {phi.shape} does not match grid {prob.grid.shape}")
    tol = cfg["verify.solution_tol"]
    grid = prob.grid
    summary = {}
    resid = solution_residual(phi, prob)
    summary["residual"] = check(resid, tol)
    summary["mean_phi"] = check(abs(grid.mean(phi)), cfg["monitors.mean_tol"])
    summary["mass"] = check(abs(grid.integrate(F_op(phi, prob)) - 1.0), cfg["monitors.mass_tol"])
    margin = taming_margin(phi, prob)
    summary["taming"] = check(-margin, 0.0, ok=margin > 0)
    if resid <= tol and margin > 0:
        pw = pointwise_identity_scan(phi, prob, tol)
        summary["product_identity"] = check(pw["product"], cfg["monitors.identity_tol"])
        summary["norm_identity"] = check(pw["da_norm"], cfg["monitors.identity_tol"])
        summary["laplacian_bound"] = check(second_order_monitor(phi, prob)["laplacian_bound_defect"],
                                         cfg["monitors.laplacian_bound_tol"])
    gmin = min(wedge_positivity(phi, prob)) if margin > 0 else -np.inf
    summary["wedge_positivity"] = check(-gmin, cfg["monitors.wedge_tol"])
    if phi_star is not None:
        err = float(np.abs(phi - phi_star).max() / max(np.abs(phi_star).max(), 1e-300))
        summary["recovery"] = check(err, cfg["monitors.recovery_tol"])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "verify.csv", ["check", "value", "limit", "pass"],
              [[k, c["value"], c["limit"], c["pass"]] for k, c in summary.items()])
    return finish("verify", cfg, out, summary, ["verify.csv"], t0)


def _suite_csv(path, rows):
    header = []
    for r in rows:
        for k in r:
            if k not in header:
                header.append(k)
    write_csv(path, header, [[r.get(h, "") for h in header] for r in rows])


def cmd_deform(cfg, out: Path) -> int:
    t0 = time.time()
    rows, summary = deformation_suite(cfg["deform.samples"], cfg["deform.seed"], cfg["deform.max_n"])
    out.mkdir(parents=True, exist_ok=True)
    _suite_csv(out / "deform.csv", rows)
    return finish("deform", cfg, out, summary, ["deform.csv"], t0)


def cmd_atlas_check(cfg, out: Path) -> int:
    from .atlas import build_partition

    t0 = time.time()
    rows, summary = atlas_suite(cfg["atlas.m"], cfg["atlas.N"], cfg["atlas.overlap"],
                                cfg["atlas.seed"])
    out.mkdir(parents=True, exist_ok=True)
    _suite_csv(out / "atlas.csv", rows)
    grid = TorusGrid(1, cfg["atlas.m"])
    text = "".join(f"# N={N}\n" + build_partition(grid, N, cfg["atlas.overlap"]).to_text()
                   for N in cfg["atlas.N"])
    (out / "partition.txt").write_text(text)
    return finish("atlas-check", cfg, out, summary, ["atlas.csv", "partition.txt"], t0)


def cmd_identities(cfg, out: Path, field_arg=None) -> int:
    t0 = time.time()
    prob, phi_star = build_problem(cfg)
    if field_arg or cfg["verify.field"]:
        phi = _load_state(cfg, field_arg)
        if phi.shape != prob.grid.shape:
            raise FieldFileError(f"field shape {phi.shape} does not match grid {prob.grid.shape}")
    elif phi_star is not None:
        phi = phi_star
    else:
        phi = np.zeros(prob.grid.shape)
    rows, summary = identities_suite(prob, phi, cfg["identities.states"], cfg["identities.seed"],
                                     cfg["identities.pairs"], cfg["verify.solution_tol"])
    out.mkdir(parents=True, exist_ok=True)
    _suite_csv(out / "identities.csv", rows)
    return finish("identities", cfg, out, summary, ["identities.csv"], t0)


def cmd_heatmap(cfg, out: Path, field_arg=None) -> int:
    path = field_arg or cfg["heatmap.field"]
    if not path:
        raise ConfigError("no field file given (use --field or heatmap.field)")
    vals, n, m, deg = read_field(Path(path) if field_arg else cfg.resolve(path))
    if deg != 0:
        raise FieldFileError("heatmaps need a scalar field")
    axes = tuple(cfg["heatmap.axes"])
    fixed = cfg["heatmap.fixed"] or None
    out.mkdir(parents=True, exist_ok=True)
    target = out / cfg["heatmap.output"]
    emit_heatmap(vals, target, axes=axes, fixed=fixed)
    print(f"heatmap written to {target}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "deform": cmd_deform,
    "atlas-check": cmd_atlas_check,
    "identities": cmd_identities,
    "heatmap": cmd_heatmap,
}


def make_parser():
    ap = argparse.ArgumentParser(prog="cy", description="One-form Calabi-Yau solver on flat tori.")
    ap.add_argument("--version", action="version", version=f"cy {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="path to a key = value config file")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        if name in ("verify", "identities", "heatmap"):
            sp.add_argument("--field", help="field file to inspect")
        if name == "solve":
            sp.add_argument("-v", "--verbose", action="store_true", help="log continuation steps")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out) if args.out else cfg.resolve(cfg["output.dir"])
        fn = COMMANDS[args.command]
        if args.command == "solve":
            log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
            return fn(cfg, out, log=log)
        if args.command in ("verify", "identities", "heatmap"):
            return fn(cfg, out, field_arg=args.field)
        return fn(cfg, out)
    except (ConfigError, FieldFileError, SliceRequired) as exc:
        print(f"cy {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepUnderflow as exc:
        print(f"cy {args.command}: {exc}", file=sys.stderr)
        return EXIT_UNDERFLOW
    except CYError as exc:
        print(f"cy {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
