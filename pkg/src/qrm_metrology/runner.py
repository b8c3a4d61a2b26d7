"""Execute scenarios: single points, sweeps, and order-preserving parallel maps."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor, wait
from dataclasses import dataclass, field

import numpy as np

from .config import Scenario
from .fitting import FitResult, fit_power_law
from .metrology import max_inverted_variance
from .pipeline import PointResult, evaluate_point


@dataclass(frozen=True)
class SweepRecord:
    axis_value: float
    fg_max: float
    t_star: float
    refined: bool
    diagnostics: dict = field(default_factory=dict, compare=False)


def evaluate_scenario(sc: Scenario) -> PointResult:
    return evaluate_point(
        sc.model,
        sc.noise,
        sc.init,
        sc.integrator,
        delta_g=sc.delta_g,
        frame=sc.frame,
        backend=sc.backend,
        auto_trunc=sc.auto_trunc,
        richardson=sc.richardson,
    )


def peak_record(sc: Scenario, axis_value=float("nan")) -> SweepRecord:
    """Evaluate one point and keep only its envelope maximum."""
    res = evaluate_scenario(sc)
    peak = max_inverted_variance(res.series)
    return SweepRecord(float(axis_value), peak.fg_max, peak.t_star, peak.refined, res.diagnostics())


def _peak_task(args):
    sc, value = args
    return peak_record(sc, value)


def _tag(exc, point):
    exc.point = point
    return exc


def run_ordered(fn, items, workers=1, labels=None, progress=None):
    """``[fn(x) for x in items]``, optionally in worker processes.

    Results keep input order.  On the first failure (in input order) pending
    items are cancelled, running ones are drained, and the exception is
    re-raised with a ``point`` attribute naming the failed item.
    """
    items = list(items)
    labels = list(labels) if labels is not None else [{"index": i} for i in range(len(items))]
    out = []
    if workers <= 1 or len(items) <= 1:
        for i, item in enumerate(items):
            t0 = time.perf_counter()
            try:
                res = fn(item)
            except Exception as exc:
                raise _tag(exc, labels[i])
            out.append(res)
            if progress:
                progress(i, len(items), labels[i], res, time.perf_counter() - t0)
        return out
    t0 = time.perf_counter()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, item) for item in items]
        for i, fut in enumerate(futures):
            try:
                res = fut.result()
            except Exception as exc:
                for other in futures:
                    other.cancel()
                wait(futures)
                raise _tag(exc, labels[i])
            out.append(res)
            if progress:
                progress(i, len(items), labels[i], res, time.perf_counter() - t0)
    return out


def run_sweep(sc: Scenario, workers=None, progress=None):
    """Run every sweep point; returns ``(records, fit_or_None)``."""
    if sc.sweep is None:
        raise ValueError("scenario has no sweep")
    points = sc.points()
    labels = [{"axis": sc.sweep.axis, "value": v, "index": i} for i, v in enumerate(sc.sweep.values)]
    records = run_ordered(
        _peak_task,
        list(zip(points, sc.sweep.values)),
        workers=sc.workers if workers is None else workers,
        labels=labels,
        progress=progress,
    )
    fit = None
    if sc.sweep.fit:
        fit = fit_records(records)
    return records, fit


def fit_records(records, x=None) -> FitResult:
    xs = np.array([r.axis_value for r in records]) if x is None else np.asarray(x, float)
    return fit_power_law(xs, [r.fg_max for r in records])
