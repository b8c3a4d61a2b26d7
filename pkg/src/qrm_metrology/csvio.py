"""CSV output with a leading ``#`` comment line and a header row.

Floats are written with ``repr`` so that identical inputs give byte-identical
files and values round-trip exactly.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .errors import ConfigError

TRAJECTORY_COLUMNS = ("t", "ex", "ep", "exx", "epp", "eg", "chi", "var_x", "fg")
SWEEP_COLUMNS = ("axis_value", "fg_max", "t_star")
FIT_COLUMNS = ("a", "b", "rms_log_residual", "n_points")


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def write_csv(path, header, rows, comment=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if comment:
            fh.write("# " + " ".join(str(comment).split("\n")) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])


def read_csv(path):
    """Return ``(header, {column: float array})``, skipping ``#`` lines."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ConfigError(f"{path}: no header row") from None
    cols = {h: [] for h in header}
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise ConfigError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
        for h, v in zip(header, row):
            cols[h].append(v)
    out = {}
    for h, vals in cols.items():
        try:
            out[h] = np.array([float(v) for v in vals])
        except ValueError:
            out[h] = np.array(vals, dtype=object)
    return header, out


def trajectory_rows(series, trajectory):
    m = trajectory.moments
    for i, t in enumerate(series.times):
        yield (t, m[i, 0], m[i, 1], m[i, 2], m[i, 3], m[i, 4], series.chi[i], series.var_x[i], series.fg[i])
