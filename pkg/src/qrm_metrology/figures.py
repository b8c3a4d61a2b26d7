"""Figure pipelines: parameter grids, rescaled axes, fits, CSV and SVG output.

Time-series figures (``*a``) hold one F_g(t) curve per value of the curve
parameter; scaling figures (``*b``) hold one fg_max-versus-abscissa series per
curve value plus a power-law fit where the figure calls for one.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import svg
from .config import Scenario
from .csvio import FIT_COLUMNS, write_csv
from .dynamics import IntegratorConfig, NoiseParams, default_horizon
from .errors import ConfigError
from .fitting import fit_power_law
from .hilbert import ModelParams, delta_gap, kT_from_nbar
from .metrology import local_maxima
from .pipeline import InitSpec
from .runner import evaluate_scenario, peak_record, run_ordered

G_VALUES = (0.94, 0.95, 0.96, 0.97, 0.98)
KAPPA_VALUES = (0.01, 0.02, 0.03, 0.04, 0.05)
NBAR_VALUES = (1.0, 2.0, 3.0, 4.0, 5.0)
XI_VALUES = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)

LABELS = {"g": "g", "kappa": "kappa/omega", "nbar": "nbar", "xi": "xi"}


@dataclass(frozen=True)
class FigureSpec:
    fid: str
    title: str
    kind: str  # "series" | "scaling"
    curve_axis: str
    curve_values: tuple
    x_axis: str = "t"
    x_values: tuple = ()
    base: dict = field(default_factory=dict)
    fit: bool = False
    time_scale: str = "t"  # "t" | "gap" | "sqrt"


FIGURES = {
    "fig1a": FigureSpec("fig1a", "F_g(t), g=0.96, nbar=0", "series", "kappa", KAPPA_VALUES, base={"g": 0.96}),
    "fig1b": FigureSpec(
        "fig1b", "max F_g vs kappa", "scaling", "g", G_VALUES, "kappa", KAPPA_VALUES, fit=True
    ),
    "fig2a": FigureSpec(
        "fig2a", "F_g vs rescaled time, kappa=0.05", "series", "g", G_VALUES, base={"kappa": 0.05}, time_scale="gap"
    ),
    "fig2b": FigureSpec("fig2b", "max F_g vs gap", "scaling", "kappa", KAPPA_VALUES, "g", G_VALUES, fit=True),
    "fig4a": FigureSpec(
        "fig4a", "F_g(t), g=0.96, kappa=0.05", "series", "nbar", NBAR_VALUES, base={"g": 0.96, "kappa": 0.05}
    ),
    "fig4b": FigureSpec(
        "fig4b",
        "max F_g vs temperature",
        "scaling",
        "kappa",
        (0.05,),
        "nbar",
        NBAR_VALUES,
        base={"g": 0.96},
        fit=True,
    ),
    "fig5a": FigureSpec(
        "fig5a", "F_g(t) for squeezed states", "series", "xi", XI_VALUES, base={"g": 0.96, "kappa": 0.05}
    ),
    "fig5b": FigureSpec("fig5b", "max F_g vs squeezing", "scaling", "kappa", KAPPA_VALUES, "xi", XI_VALUES, base={"g": 0.96}),
    "fig7a": FigureSpec(
        "fig7a",
        "two-photon F_g vs rescaled time, kappa=0.05",
        "series",
        "g",
        G_VALUES,
        base={"kappa": 0.05, "kind": "two_photon"},
        time_scale="sqrt",
    ),
    "fig7b": FigureSpec(
        "fig7b",
        "two-photon max F_g vs gap",
        "scaling",
        "kappa",
        KAPPA_VALUES,
        "g",
        G_VALUES,
        base={"kind": "two_photon"},
        fit=True,
    ),
}


@dataclass(frozen=True)
class RunOptions:
    """Knobs shared by all figure runs."""

    backend: str = "master"
    horizon_factor: float | None = None  # t_max = factor / kappa; None -> default horizon
    n_samples: int = 4000
    rel_tol: float = IntegratorConfig.rel_tol
    abs_tol: float = IntegratorConfig.abs_tol
    delta_g: float = 1e-4
    workers: int = 1


def rescale_time(t, g, mode, omega=1.0):
    """Map time onto ``D_g w t / 2pi`` ("gap") or ``sqrt(1-g^2) w t / pi`` ("sqrt")."""
    t = np.asarray(t, dtype=float)
    if mode == "gap":
        return delta_gap(g) * omega * t / (2 * math.pi)
    if mode == "sqrt":
        return math.sqrt(1 - g * g) * omega * t / math.pi
    return t


def abscissa(axis, value):
    """Plotted x value for a swept parameter."""
    if axis == "g":
        return float(delta_gap(value))
    if axis == "nbar":
        return kT_from_nbar(value)
    return float(value)


def abscissa_name(axis):
    return {"g": "delta_g", "nbar": "kT_over_omega"}.get(axis, axis)


def point_scenario(params: dict, opts: RunOptions) -> Scenario:
    g = params.get("g", 0.96)
    kappa = params["kappa"] if "kappa" in params else 0.05
    noise = NoiseParams(kappa, params.get("nbar", 0.0), params.get("kind", "single_photon"))
    xi = params.get("xi", 0.0)
    init = InitSpec("squeezed", xi) if xi > 0 else InitSpec()
    t_max = None if opts.horizon_factor is None else min(opts.horizon_factor / kappa, default_horizon(kappa))
    integ = IntegratorConfig(rel_tol=opts.rel_tol, abs_tol=opts.abs_tol, t_max=t_max, n_samples=opts.n_samples)
    return Scenario(ModelParams(g), noise, init, integ, delta_g=opts.delta_g, backend=opts.backend)


def grid_points(spec: FigureSpec):
    """``[(curve_value, x_value, params), ...]`` in output order."""
    out = []
    for cv in spec.curve_values:
        xs = spec.x_values if spec.kind == "scaling" else (None,)
        for xv in xs:
            params = dict(spec.base)
            params[spec.curve_axis] = cv
            if xv is not None:
                params[spec.x_axis] = xv
            out.append((cv, xv, params))
    return out


def _task_series(sc):
    res = evaluate_scenario(sc)
    return res.series, res.diagnostics()


def _task_peak(sc):
    return peak_record(sc)


def compute(spec: FigureSpec, opts: RunOptions = RunOptions(), progress=None):
    """Run all points of a figure.  Returns a list aligned with :func:`grid_points`."""
    pts = grid_points(spec)
    scenarios = [point_scenario(p, opts) for _, _, p in pts]
    labels = [dict(p) for _, _, p in pts]
    fn = _task_series if spec.kind == "series" else _task_peak
    return run_ordered(fn, scenarios, workers=opts.workers, labels=labels, progress=progress)


def fits_for(spec: FigureSpec, records):
    """One power-law fit per curve (fg_max versus the plotted abscissa)."""
    out = []
    pts = grid_points(spec)
    for cv in spec.curve_values:
        xs = [abscissa(spec.x_axis, xv) for (c, xv, _) in pts if c == cv]
        ys = [r.fg_max for (c, _, _), r in zip(pts, records) if c == cv]
        out.append((cv, fit_power_law(xs, ys)))
    return out


def first_peak_time(series, min_rel_height=1e-3):
    """Time of the first interior local maximum of F_g above ``min_rel_height * max``."""
    peaks = local_maxima(series, min_rel_height)
    return peaks[0].t_star if peaks else float("nan")


def _comment(spec, opts):
    parts = [f"figure={spec.fid}", f"curve_axis={spec.curve_axis}", "curve_values=" + ",".join(map(repr, spec.curve_values))]
    if spec.kind == "scaling":
        parts += [f"x_axis={spec.x_axis}", "x_values=" + ",".join(map(repr, spec.x_values))]
    parts += [f"{k}={v}" for k, v in sorted(spec.base.items())]
    parts += [
        f"backend={opts.backend}",
        f"horizon={'default' if opts.horizon_factor is None else repr(opts.horizon_factor) + '/kappa'}",
        f"n_samples={opts.n_samples}",
        f"rel_tol={opts.rel_tol!r}",
        f"abs_tol={opts.abs_tol!r}",
        f"delta_g={opts.delta_g!r}",
    ]
    return " ".join(parts)


def write_figure(spec: FigureSpec, results, out_dir, opts: RunOptions = RunOptions(), make_svg=True):
    """Write ``<fid>.csv`` (and ``<fid>_fit.csv``, ``<fid>.svg``); returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    comment = _comment(spec, opts)
    pts = grid_points(spec)
    paths = []
    xlabel = {"t": "omega t", "gap": "Delta_g omega t / 2pi", "sqrt": "sqrt(1-g^2) omega t / pi"}[spec.time_scale]
    if spec.kind == "series":
        plot = svg.Plot(spec.title, xlabel, "F_g")
        rows = []
        for (cv, _, params), (series, _diag) in zip(pts, results):
            g = params.get("g", 0.96)
            x = rescale_time(series.times, g, spec.time_scale)
            rows.extend(zip([cv] * len(x), series.times, x, series.chi, series.var_x, series.fg))
            plot.add(f"{LABELS[spec.curve_axis]}={cv:g}", x, series.fg)
        header = (spec.curve_axis, "t", "x", "chi", "var_x", "fg")
    else:
        xname = abscissa_name(spec.x_axis)
        plot = svg.Plot(spec.title, xname, "max F_g", logx=spec.x_axis != "xi", logy=True)
        rows = []
        for (cv, xv, _), rec in zip(pts, results):
            rows.append((cv, xv, abscissa(spec.x_axis, xv), rec.fg_max, rec.t_star))
        header = (spec.curve_axis, spec.x_axis, "axis_value", "fg_max", "t_star")
        fits = fits_for(spec, results) if spec.fit else []
        for cv in spec.curve_values:
            xs = [r[2] for r in rows if r[0] == cv]
            ys = [r[3] for r in rows if r[0] == cv]
            plot.add(f"{LABELS[spec.curve_axis]}={cv:g}", xs, ys, markers=True)
        for cv, fit in fits:
            xs = [r[2] for r in rows if r[0] == cv]
            xx = np.geomspace(min(xs), max(xs), 50)
            plot.add(f"fit b={fit.b:.3f}", xx, fit(xx), dashed=True)
        if fits:
            path = os.path.join(out_dir, f"{spec.fid}_fit.csv")
            write_csv(
                path,
                (spec.curve_axis,) + FIT_COLUMNS,
                [(cv, f.a, f.b, f.rms_log_residual, f.n_points) for cv, f in fits],
                comment,
            )
            paths.append(path)
    path = os.path.join(out_dir, f"{spec.fid}.csv")
    write_csv(path, header, rows, comment)
    paths.insert(0, path)
    if make_svg:
        path = os.path.join(out_dir, f"{spec.fid}.svg")
        svg.write(plot, path)
        paths.append(path)
    return paths


def get_spec(fid) -> FigureSpec:
    try:
        return FIGURES[fid]
    except KeyError:
        raise ConfigError(f"unknown figure id {fid!r}; known: {', '.join(FIGURES)}", key="figure") from None


def reproduce(fid, out_dir, opts: RunOptions = RunOptions(), progress=None, make_svg=True):
    spec = get_spec(fid)
    results = compute(spec, opts, progress)
    return write_figure(spec, results, out_dir, opts, make_svg), results
