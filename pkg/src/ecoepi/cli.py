"""Command-line front end.

    ecoepi {equilibria|stability|simulate|sweep|verify} --scenario FILE
           [--t-end R] [--stride R] [--refine] [--out FILE]

``--scenario`` accepts a path or the name of a bundled scenario.  Reports
go to ``--out`` (or stdout).  A run manifest is written next to ``--out`` as
``<out>.manifest.json``, or to stderr when writing to stdout.

Exit codes: 0 success, 1 analysis failure (failed check, integration
event), 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .equilibria import EquilibriumId, all_equilibria
from .integrate import SolverOptions, Termination, detect_attractor, simulate
from .model import ModelDomainError
from .scenario import load_scenario
from .stability import classify, hopf_K, transcritical_points
from .sweep import refine_transition, run_sweep, transitions
from .verify import run_checks

__all__ = ["main", "build_parser", "equilibria_report", "stability_report", "trajectory_csv", "sweep_csv",
           "TRAJECTORY_COLUMNS"]

TRAJECTORY_COLUMNS = ("t", "A", "T", "U", "S", "I", "P")

EXIT_OK, EXIT_FAILURE, EXIT_INPUT = 0, 1, 2


class UsageError(Exception):
    pass


def _clean(obj):
    # JSON has no NaN/inf; report them as null.
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(doc) -> str:
    # repr-based float formatting is the shortest string that round-trips exactly.
    return json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"


def _fmt(x) -> str:
    return format(x, ".17g")


def _header(scenario):
    p = scenario.params
    return {"scenario": scenario.name, "model": p.variant.value, "params": p.as_dict()}


def equilibria_report(scenario) -> dict:
    doc = _header(scenario)
    doc["equilibria"] = [rec.to_dict() for rec in all_equilibria(scenario.params)]
    return doc


def stability_report(scenario) -> dict:
    p = scenario.params
    doc = _header(scenario)
    rows = []
    for rec in all_equilibria(p):
        entry = rec.to_dict()
        entry["stability"] = classify(p, rec).to_dict() if rec.feasible else None
        rows.append(entry)
    doc["equilibria"] = rows
    doc["hopf_K"] = hopf_K(p) if p.g > 0 else None
    doc["transcritical"] = [t.to_dict() for t in transcritical_points(p)]
    return doc


def trajectory_csv(traj) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    original = traj.original()
    for t, y, x in zip(traj.times, traj.reformed(), original):
        writer.writerow([_fmt(v) for v in (t, *y, *x)])
    return buf.getvalue()


def sweep_columns(spec, variant):
    cols = [spec.parameter]
    for eq_id in EquilibriumId:
        label = eq_id.label(variant)
        cols += [f"{label}_feasible", f"{label}_stable", f"{label}_max_re"]
    return cols + ["attractor", "flags", "error"]


def sweep_csv(spec, rows, refined=None) -> str:
    """One row per grid value; ``refined`` appends a threshold table after a blank line."""
    variant = spec.base.variant
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(sweep_columns(spec, variant))
    for row in rows:
        line = [_fmt(row.value)]
        for eq_id in EquilibriumId:
            cell = row.cells.get(eq_id)
            if cell is None:
                line += ["", "", ""]
            else:
                line += [int(cell.feasible), int(cell.stable),
                         "" if cell.max_real_part is None else _fmt(cell.max_real_part)]
        flags = [_relabel(f, variant) for f in row.flags]
        line += [row.attractor or "", ";".join(flags), row.error or ""]
        writer.writerow(line)
    if refined is not None:
        buf.write("\n")
        writer.writerow(["transition", "lo", "hi", "threshold", "error"])
        for tr, value, err in refined:
            writer.writerow([_relabel(tr.flag, variant), _fmt(tr.lo_value), _fmt(tr.hi_value),
                             "" if value is None else _fmt(value), err or ""])
    return buf.getvalue()


def _relabel(flag, variant):
    if flag[:1] == "E" and flag[1:2].isdigit():
        return variant.prefix + flag[1:]
    return flag


def _options(scenario, args) -> SolverOptions:
    opts = scenario.solver
    if args.t_end is not None:
        if not args.t_end > 0:
            raise UsageError("--t-end must be positive")
        opts = replace(opts, t_end=args.t_end)
    if args.stride is not None:
        if not args.stride > 0:
            raise UsageError("--stride must be positive")
        opts = replace(opts, dense_output_stride=args.stride)
    return opts


def _run(args):
    """Returns (text, exit code, manifest extras, scenario)."""
    if args.command == "verify":
        report = run_checks()
        return dumps(report.to_dict()), EXIT_OK if report.passed else EXIT_FAILURE, {"passed": report.passed}, None
    if args.scenario is None:
        raise UsageError(f"{args.command} requires --scenario")
    scenario = load_scenario(args.scenario)
    if args.command == "equilibria":
        return dumps(equilibria_report(scenario)), EXIT_OK, {}, scenario
    if args.command == "stability":
        return dumps(stability_report(scenario)), EXIT_OK, {}, scenario
    if args.command == "simulate":
        opts = _options(scenario, args)
        traj = simulate(scenario.params, scenario.start, opts)
        extra = {"termination": traj.termination.value, "samples": len(traj),
                 "solver": {"rel_tol": opts.rel_tol, "abs_tol": opts.abs_tol, "max_step": opts.max_step,
                            "t_end": opts.t_end, "dense_output_stride": opts.stride},
                 "init": dict(zip("ATU", scenario.start))}
        if len(traj) and traj.termination is Termination.COMPLETED:
            try:
                extra["attractor"] = detect_attractor(traj).to_dict()
            except ModelDomainError as exc:
                extra["attractor"] = {"kind": None, "error": str(exc)}
        code = EXIT_OK if traj.termination is Termination.COMPLETED else EXIT_FAILURE
        return trajectory_csv(traj), code, extra, scenario
    if args.command == "sweep":
        spec = scenario.sweep
        if spec is None:
            raise UsageError(f"scenario {scenario.name} has no sweep block")
        if args.t_end is not None or args.stride is not None:
            spec = replace(spec, sim_opts=_options(scenario, args))
        rows = run_sweep(spec, workers=args.workers)
        refined = None
        if args.refine:
            refined = []
            for tr in transitions(rows):
                if tr.quantity == "attractor":
                    continue
                try:
                    refined.append((tr, refine_transition(spec, tr), None))
                except ModelDomainError as exc:
                    refined.append((tr, None, str(exc)))
        errored = sum(r.errored for r in rows)
        return sweep_csv(spec, rows, refined), EXIT_OK, {"rows": len(rows), "errored_rows": errored}, scenario
    raise UsageError(f"unknown command {args.command}")


def manifest(args, scenario, outputs, extra) -> dict:
    doc = {
        "tool": "ecoepi",
        "version": __version__,
        "subcommand": args.command,
        "scenario": None if scenario is None else scenario.name,
        "scenario_source": None if scenario is None else scenario.source,
        "scenario_sha256": None if scenario is None else scenario.digest,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "outputs": outputs,
        "arguments": {"t_end": args.t_end, "stride": args.stride, "refine": bool(args.refine)},
    }
    doc.update(extra)
    return doc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecoepi", description="Herd-defense ecoepidemic model toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=["equilibria", "stability", "simulate", "sweep", "verify"])
    parser.add_argument("--scenario", help="scenario JSON file or bundled scenario name")
    parser.add_argument("--t-end", type=float, dest="t_end", help="integration horizon")
    parser.add_argument("--stride", type=float, help="sampling interval of the emitted series")
    parser.add_argument("--refine", action="store_true", help="bisect flagged sweep cells")
    parser.add_argument("--workers", type=int, default=None, help="processes for sweep evaluation")
    parser.add_argument("--out", type=Path, help="output file (default stdout)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text, code, extra, scenario = _run(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ecoepi: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ModelDomainError as exc:
        print(f"ecoepi: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
        doc = manifest(args, scenario, [str(args.out)], extra)
        Path(f"{args.out}.manifest.json").write_text(dumps(doc), encoding="utf-8")
    else:
        sys.stdout.write(text)
        sys.stderr.write(dumps(manifest(args, scenario, ["<stdout>"], extra)))
    return code


if __name__ == "__main__":
    sys.exit(main())
