"""Command-line interface.

::

    qrm-metrology simulate scenario.cfg
    qrm-metrology sweep scenario.cfg --workers 2
    qrm-metrology fit out/sweep.csv --x axis_value --y fg_max
    qrm-metrology reproduce fig1b --out figs

Exit codes: 0 ok, 2 configuration or input error, 3 numerical failure
(truncation, step size, diagnostics), 4 envelope maximum at the horizon.
Failures print one JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__, svg
from .config import load_scenario
from .csvio import (
    FIT_COLUMNS,
    SWEEP_COLUMNS,
    TRAJECTORY_COLUMNS,
    format_value,
    read_csv,
    trajectory_rows,
    write_csv,
)
from .errors import ConfigError, NumericalFailure, PeakAtBoundary, QRMError
from .figures import FIGURES, RunOptions, reproduce
from .fitting import fit_power_law
from .metrology import max_inverted_variance
from .runner import evaluate_scenario, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_BOUNDARY = 4


def exit_code_for(exc):
    if isinstance(exc, PeakAtBoundary):
        return EXIT_BOUNDARY
    if isinstance(exc, NumericalFailure):
        return EXIT_NUMERICAL
    if isinstance(exc, (ConfigError, ValueError, OSError)):
        return EXIT_CONFIG
    return EXIT_NUMERICAL


def error_record(exc):
    rec = {"error": type(exc).__name__, "exit_code": exit_code_for(exc), "message": str(exc)}
    for attr in ("key", "line", "point"):
        val = getattr(exc, attr, None)
        if val is not None:
            rec[attr] = val
    return rec


class Reporter:
    def __init__(self, quiet=False):
        self.quiet = quiet

    def __call__(self, msg):
        if not self.quiet:
            print(msg, file=sys.stderr, flush=True)

    def progress(self, i, n, label, result, elapsed):
        if self.quiet:
            return
        desc = " ".join(f"{k}={v}" for k, v in label.items() if k != "index")
        extra = ""
        if hasattr(result, "fg_max"):
            extra = f" fg_max={result.fg_max:.6g} t*={result.t_star:.4g}"
        self(f"[{i + 1}/{n}] {desc}{extra} ({elapsed:.1f} s)")


def _comment(sc):
    return " ".join(sc.resolved())


def cmd_simulate(args, report):
    sc = load_scenario(args.config)
    if sc.sweep is not None:
        raise ConfigError("scenario defines a sweep; use the 'sweep' verb", key="sweep.axis")
    out = args.out or sc.output_dir
    os.makedirs(out, exist_ok=True)
    report(f"simulating g={sc.model.g} kappa={sc.noise.kappa} nbar={sc.noise.nbar} ({sc.noise.kind})")
    res = evaluate_scenario(sc)
    path = os.path.join(out, "trajectory.csv")
    nominal = res.trajectories[len(res.trajectories) // 2]
    write_csv(path, TRAJECTORY_COLUMNS, trajectory_rows(res.series, nominal), _comment(sc))
    report(f"wrote {path}")
    if sc.svg:
        plot = svg.Plot(f"F_g(t), g={sc.model.g:g}, kappa={sc.noise.kappa:g}", "omega t", "F_g")
        plot.add("F_g", res.series.times, res.series.fg)
        svg.write(plot, os.path.join(out, "trajectory.svg"))
    diag = res.diagnostics()
    report(
        f"dim={diag['trunc_dim']} frame={diag['frame']} max tail={diag['max_tail']:.2e} "
        f"min eigenvalue={diag['min_eig']:.2e}"
    )
    try:
        peak = max_inverted_variance(res.series)
        report(f"fg_max={peak.fg_max:.8g} at t={peak.t_star:.6g}")
    except PeakAtBoundary as exc:
        report(f"note: {exc}")
    return EXIT_OK


def cmd_sweep(args, report):
    sc = load_scenario(args.config)
    if sc.sweep is None:
        raise ConfigError("scenario has no sweep.axis/sweep.values", key="sweep.axis")
    out = args.out or sc.output_dir
    os.makedirs(out, exist_ok=True)
    workers = args.workers if args.workers is not None else sc.workers
    records, fit = run_sweep(sc, workers=workers, progress=report.progress)
    comment = _comment(sc)
    path = os.path.join(out, "sweep.csv")
    write_csv(path, SWEEP_COLUMNS, [(r.axis_value, r.fg_max, r.t_star) for r in records], comment)
    report(f"wrote {path}")
    if fit is not None:
        fpath = os.path.join(out, "fit.csv")
        write_csv(fpath, FIT_COLUMNS, [(fit.a, fit.b, fit.rms_log_residual, fit.n_points)], comment)
        report(f"fit: a={fit.a:.6g} b={fit.b:.4f} rms={fit.rms_log_residual:.2e}")
    if sc.svg:
        logx = sc.sweep.axis != "xi" and min(sc.sweep.values) > 0
        plot = svg.Plot(f"max F_g vs {sc.sweep.axis}", sc.sweep.axis, "max F_g", logx=logx, logy=True)
        plot.add("fg_max", [r.axis_value for r in records], [r.fg_max for r in records], markers=True)
        if fit is not None:
            xs = [r.axis_value for r in records]
            plot.add(f"fit b={fit.b:.3f}", xs, fit(xs), dashed=True)
        svg.write(plot, os.path.join(out, "sweep.svg"))
    return EXIT_OK


def cmd_fit(args, report):
    header, cols = read_csv(args.csv)
    for name in (args.x, args.y):
        if name not in cols:
            raise ConfigError(f"column {name!r} not in {args.csv} (have {', '.join(header)})", key=name)
    fit = fit_power_law(cols[args.x], cols[args.y])
    comment = f"source={args.csv} x={args.x} y={args.y}"
    if args.out:
        write_csv(args.out, FIT_COLUMNS, [(fit.a, fit.b, fit.rms_log_residual, fit.n_points)], comment)
        report(f"wrote {args.out}")
    else:
        write_csv_stdout(FIT_COLUMNS, (fit.a, fit.b, fit.rms_log_residual, fit.n_points), comment)
    return EXIT_OK


def write_csv_stdout(header, row, comment):
    sys.stdout.write(f"# {comment}\n")
    sys.stdout.write(",".join(header) + "\n")
    sys.stdout.write(",".join(format_value(v) for v in row) + "\n")


def cmd_reproduce(args, report):
    opts = RunOptions(
        backend=args.backend,
        horizon_factor=args.horizon_factor,
        n_samples=args.samples,
        workers=args.workers or 1,
    )
    paths, _ = reproduce(args.figure, args.out, opts, progress=report.progress, make_svg=not args.no_svg)
    for p in paths:
        report(f"wrote {p}")
    return EXIT_OK


def build_parser():
    # --quiet is accepted before or after the verb; SUPPRESS keeps the
    # sub-parser from resetting a value given at the top level
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", "-q", action="store_true", default=argparse.SUPPRESS, help="suppress progress output")

    p = argparse.ArgumentParser(
        prog="qrm-metrology",
        description="Criticality-based metrology in the open quantum Rabi model.",
    )
    p.add_argument("--quiet", "-q", action="store_true", help="suppress progress output")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("simulate", parents=[common], help="evolve one scenario and write its trajectory")
    s.add_argument("config")
    s.add_argument("--out", help="output directory (overrides output.dir)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", parents=[common], help="run a one-axis sweep of envelope maxima")
    s.add_argument("config")
    s.add_argument("--out", help="output directory (overrides output.dir)")
    s.add_argument("--workers", type=int, help="worker processes (overrides run.workers)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("fit", parents=[common], help="power-law fit of two CSV columns")
    s.add_argument("csv")
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True)
    s.add_argument("--out", help="write the fit CSV here instead of stdout")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("reproduce", parents=[common], help="compute one figure's data")
    s.add_argument("figure", choices=sorted(FIGURES))
    s.add_argument("--out", default="figures")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--backend", choices=("master", "moments"), default="master")
    s.add_argument(
        "--horizon-factor",
        type=float,
        default=None,
        help="horizon t_max = FACTOR / kappa (default: min(8/kappa, 2000))",
    )
    s.add_argument("--samples", type=int, default=4000, help="output grid size")
    s.add_argument("--no-svg", action="store_true")
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    report = Reporter(args.quiet)
    try:
        return args.func(args, report)
    except (QRMError, ValueError, OSError) as exc:
        print(json.dumps(error_record(exc), default=str), file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
