"""Command-line front end.

    ccfunnel run <scenario>... [--set key=value]... [--out DIR] [--jobs N]
    ccfunnel check <trace.csv> <scenario> [--set key=value]...
    ccfunnel validate <scenario> [--set key=value]...

``<scenario>`` is a file path or the name of a bundled scenario
(``paper_kc3``, ``paper_kc03``).  Exit status: 0 pass, 1 check or
validation failure, 2 I/O or parse error.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import scenario as _scenario
from .checks import check_trace
from .engine import run_batch, simulate
from .errors import ScenarioError, ScenarioParseError, TraceSchemaError
from .trace import SimTrace, read_csv

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _write_table(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    table = np.column_stack(columns)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in table:
            writer.writerow([repr(float(v)) for v in row])


def write_plot_data(trace: SimTrace, sc: "_scenario.Scenario", out: Path) -> List[Path]:
    """Per-output funnel and modification-signal tables, plus the x1-x2 plane."""
    written = []
    t = trace.t
    for i in range(trace.n_outputs):
        j = i + 1
        path = out / f"funnel_{j}.csv"
        _write_table(path, ["t", f"x_{j}", f"rhoL_{j}", f"rhoU_{j}", f"softL_{j}", f"softU_{j}",
                            f"hardL_{j}", f"hardU_{j}"],
                     [t, trace.x[:, i], trace.rho_lower[:, i], trace.rho_upper[:, i],
                      trace.soft_lower[:, i], trace.soft_upper[:, i],
                      trace.hard_lower[:, i], trace.hard_upper[:, i]])
        written.append(path)
        path = out / f"phi_{j}.csv"
        _write_table(path, ["t", f"phiL_{j}", f"phiU_{j}", f"etaL_{j}", f"etaU_{j}"],
                     [t, trace.phi_lower[:, i], trace.phi_upper[:, i],
                      trace.hard_upper[:, i] - trace.soft_lower[:, i],
                      trace.soft_upper[:, i] - trace.hard_lower[:, i]])
        written.append(path)
    if trace.n_outputs == 2:
        ref = [np.array([sc.reference(i).value(tk) for tk in t]) for i in range(2)]
        path = out / "plane.csv"
        _write_table(path, ["t", "x_1", "x_2", "xd_1", "xd_2",
                            "hardL_1", "hardU_1", "hardL_2", "hardU_2"],
                     [t, trace.x[:, 0], trace.x[:, 1], ref[0], ref[1],
                      trace.hard_lower[:, 0], trace.hard_upper[:, 0],
                      trace.hard_lower[:, 1], trace.hard_upper[:, 1]])
        written.append(path)
    return written


def _load(path: str, overrides) -> "_scenario.Scenario":
    return _scenario.load(path, overrides or ())


def _report_issues(issues, stream) -> None:
    for issue in issues:
        print(f"validation: {issue}", file=stream)


def cmd_validate(args) -> int:
    sc = _load(args.scenario, args.set)
    issues = sc.validation_issues()
    if issues:
        _report_issues(issues, sys.stderr)
        return EXIT_FAIL
    print(f"{sc.name}: valid ({sc.n_outputs} outputs, t_end = {sc.sim.t_end} s, "
          f"h = {sc.sim.h} s, {sc.sim.scheme})")
    return EXIT_OK


def cmd_run(args) -> int:
    scenarios = [_load(path, args.set) for path in args.scenario]
    status = EXIT_OK
    runnable = []
    for sc in scenarios:
        issues = sc.validation_issues()
        if issues:
            _report_issues(issues, sys.stderr)
            status = EXIT_FAIL
        else:
            runnable.append(sc)
    traces = run_batch(runnable, workers=args.jobs)
    base = Path(args.out)
    for sc, trace in zip(runnable, traces):
        out = base / sc.name if len(scenarios) > 1 else base
        try:
            out.mkdir(parents=True, exist_ok=True)
            trace.to_csv(out / "trace.csv")
            report = check_trace(trace, sc)
            text = f"scenario: {sc.name}\n" + report.summary()
            (out / "report.txt").write_text(text)
            write_plot_data(trace, sc, out)
        except OSError as exc:
            print(f"error: cannot write results to {out}: {exc.strerror}", file=sys.stderr)
            return EXIT_ERROR
        sys.stdout.write(text)
        for f in trace.faults:
            print(f"fault: {f.kind} at t = {f.time!r}: {f.message}", file=sys.stderr)
        if not report.passed:
            status = EXIT_FAIL
    return status


def cmd_check(args) -> int:
    sc = _load(args.scenario, args.set)
    trace = read_csv(args.trace, n_outputs=sc.n_outputs)
    if not trace.faults and len(trace) != sc.sim.n_rows:
        raise TraceSchemaError(f"trace has {len(trace)} rows and no fault record, "
                               f"expected {sc.sim.n_rows}: file is truncated or from another run")
    report = check_trace(trace, sc)
    sys.stdout.write(report.summary())
    for r in report.failures():
        where = f" at row {r.row}" if r.row is not None else ""
        print(f"violated: {r.name}{where}: {r.detail}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccfunnel",
        description="Constraint-consistent funnel planning with prescribed-performance control.")
    sub = parser.add_subparsers(dest="command", required=True)

    def overrides(p):
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a scenario entry, e.g. planner.k_c=0.3 "
                            "(list indices are 1-based: outputs.2.eps_hard=0.2)")

    run = sub.add_parser("run", help="simulate, check and write trace and plot data")
    run.add_argument("scenario", nargs="+", help="scenario file or bundled scenario name")
    overrides(run)
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument("--jobs", type=int, default=1, help="parallel runs for several scenarios")
    run.set_defaults(func=cmd_run)

    check = sub.add_parser("check", help="re-check an existing trace against a scenario")
    check.add_argument("trace")
    check.add_argument("scenario")
    overrides(check)
    check.set_defaults(func=cmd_check)

    validate = sub.add_parser("validate", help="run the static scenario checks only")
    validate.add_argument("scenario")
    overrides(validate)
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except TraceSchemaError as exc:
        print(f"error: {args.trace}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ScenarioError as exc:
        _report_issues(exc.issues, sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
