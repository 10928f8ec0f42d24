"""Command line: ``spaceform-dirichlet {verify,solve,curvature}``.

Exit codes: 0 success, 2 validation or input error, 3 continuation failure.

Report schema (one JSON object per line):

* ``{"type": "header", "timestamp": ...}`` (the only non-deterministic line)
* ``{"type": "step", "phase", "t", "accepted", "newton_iterations", "residual",
  "min_convexity", "kappa_min", "kappa_max", "u_min", "u_max", "grad_max",
  "comparison_margin", "subsolution_margin", "reason"}`` per attempted step
* ``{"type": "summary", "outcome", "failed_t", "failure_reason", "constants",
  "diagnostics", "subsolution"}``
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ProblemConfig, load_config
from .errors import ContinuationError, DomainError, PreconditionError
from .expressions import FieldExpression
from .io import curvature_table, node_curvatures, read_field, write_field, write_mesh
from .solver import PATHS, estimate_monitors, solve_pipeline
from .spaceform import SpaceFormModel
from .verify import SUITES, run_suites

EXIT_OK, EXIT_VALIDATION, EXIT_CONTINUATION = 0, 2, 3


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def cmd_verify(args) -> int:
    results = run_suites(args.seed, args.suite or None, inject_sign_error=args.inject_sign_error)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else 1


def _report_path(args, cfg: ProblemConfig):
    if args.report:
        return Path(args.report)
    if "report" in cfg.outputs:
        return Path(cfg.outputs["report"])
    return Path(args.config).with_suffix(".report.jsonl")


def cmd_solve(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.grid:
            cfg = cfg.with_grid(*args.grid).validate()
        problem = cfg.build_problem()
    except (OSError, DomainError, PreconditionError) as exc:
        _err(exc)
        return EXIT_VALIDATION
    path = args.path or cfg.path
    report_path = _report_path(args, cfg)
    try:
        fld, report = solve_pipeline(problem, path, strict_comparison=args.strict_comparison)
    except (DomainError, PreconditionError) as exc:
        _err(exc)
        return EXIT_VALIDATION
    except ContinuationError as exc:
        if exc.report is not None:
            report_path.write_text(exc.report.to_jsonl())
        _err(f"{exc} (partial report: {report_path})")
        return EXIT_CONTINUATION
    report_path.write_text(report.to_jsonl())
    mesh = args.export_mesh or cfg.outputs.get("mesh")
    if mesh:
        write_mesh(mesh, fld, problem.model)
    field_out = args.field or cfg.outputs.get("field")
    if field_out:
        write_field(field_out, fld, problem.model)

    last = report.accepted[-1]
    diag = report.diagnostics
    print(f"outcome: {report.outcome}")
    print(f"final residual: {last.residual!r}")
    print(f"kappa range: [{last.kappa_min!r}, {last.kappa_max!r}]")
    print("monitors: " + ", ".join(f"{k}={v:.6g}" for k, v in diag.items()))
    print(f"min comparison margin: {min(r.comparison_margin for r in report.accepted)!r}")
    if cfg.exact is not None:
        d = problem.domain
        exact = FieldExpression.parse(cfg.exact).values(d.z, d.y)
        print(f"sup |u - exact|: {float(np.max(np.abs(fld.u - exact)))!r}")
    print(f"report: {report_path}")
    return EXIT_OK


def cmd_curvature(args) -> int:
    try:
        fld, model = read_field(args.field)
    except (OSError, DomainError) as exc:
        _err(exc)
        return EXIT_VALIDATION
    if args.model is not None:
        model = SpaceFormModel(args.model)
    try:
        table = curvature_table(fld, model)
    except DomainError as exc:
        _err(exc)
        return EXIT_VALIDATION
    if args.out:
        Path(args.out).write_text(table)
    else:
        sys.stdout.write(table)
    kappa, tau, mins = node_curvatures(fld, model)
    out = sys.stderr if not args.out else sys.stdout
    print(f"kappa range: [{float(kappa.min())!r}, {float(kappa.max())!r}]", file=out)
    print(f"min support function: {float(tau.min())!r}", file=out)
    print(f"convexity witness: {float(mins.min())!r}", file=out)
    if mins.min() > 0:
        diag = estimate_monitors(fld, model)
        print("monitors: " + ", ".join(f"{k}={v:.6g}" for k, v in diag.items()), file=out)
    else:
        print("flag: field is not strictly locally convex", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spaceform-dirichlet", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log rejected continuation steps")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the invariant suites")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--suite", action="append", choices=list(SUITES), help="run only this suite (repeatable)")
    v.add_argument("--inject-sign-error", action="store_true", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("solve", help="solve a configured Dirichlet problem")
    s.add_argument("config")
    s.add_argument("--path", choices=["auto", *PATHS], default=None, help="continuation path (default: config)")
    s.add_argument("--report", help="report file (default: config [output] report or <config>.report.jsonl)")
    s.add_argument("--export-mesh", metavar="OBJ", help="write the solution surface as a Wavefront OBJ mesh")
    s.add_argument("--field", metavar="CSV", help="write the nodal field table")
    s.add_argument("--grid", nargs=2, type=int, metavar=("N_R", "N_THETA"), help="override the grid size")
    s.add_argument("--strict-comparison", action="store_true",
                   help="reject continuation steps whose comparison margin is below -1e-8")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("curvature", help="node-wise curvatures of a field table")
    c.add_argument("field")
    c.add_argument("--model", type=int, choices=[-1, 0, 1], help="override the model stored in the file")
    c.add_argument("--out", help="write the table here instead of stdout")
    c.set_defaults(func=cmd_curvature)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
