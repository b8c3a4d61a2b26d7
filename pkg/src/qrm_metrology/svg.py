"""Minimal self-contained SVG line plots.

Only what the figure pipelines need: several named series, optional log
axes, markers for sampled points and dashed overlays for fitted curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2")
WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=80, right=150, top=40, bottom=60)


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    markers: bool = False
    dashed: bool = False


@dataclass
class Plot:
    title: str
    xlabel: str
    ylabel: str
    logx: bool = False
    logy: bool = False
    series: list = field(default_factory=list)

    def add(self, label, x, y, markers=False, dashed=False):
        self.series.append(Series(label, np.asarray(x, float), np.asarray(y, float), markers, dashed))


def _ticks(lo, hi, log):
    if log:
        e0, e1 = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        if e1 - e0 <= 1:
            # less than a decade: use 1-2-5 steps inside it
            vals = [m * 10.0**e for e in range(e0, e1 + 1) for m in (1, 2, 5)]
            return [v for v in vals if lo <= v <= hi] or [lo, hi]
        return [10.0**e for e in range(e0, e1 + 1) if lo <= 10.0**e <= hi]
    span = hi - lo
    if span <= 0:
        return [lo]
    step = 10.0 ** math.floor(math.log10(span / 5))
    for m in (1, 2, 5, 10):
        if span / (m * step) <= 6:
            step *= m
            break
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.0e}".replace("e+0", "e").replace("e-0", "e-")
    return f"{v:g}"


def render(plot: Plot) -> str:
    xs = np.concatenate([s.x for s in plot.series])
    ys = np.concatenate([s.y for s in plot.series])
    ok = np.isfinite(xs) & np.isfinite(ys)
    if plot.logx:
        ok &= xs > 0
    if plot.logy:
        ok &= ys > 0
    xs, ys = xs[ok], ys[ok]
    tx = np.log10 if plot.logx else (lambda v: np.asarray(v, float))
    ty = np.log10 if plot.logy else (lambda v: np.asarray(v, float))
    xlo, xhi = float(xs.min()), float(xs.max())
    ylo, yhi = float(ys.min()), float(ys.max())
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0
    X0, X1 = float(tx(xlo)), float(tx(xhi))
    Y0, Y1 = float(ty(ylo)), float(ty(yhi))
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (tx(v) - X0) / (X1 - X0) * pw

    def py(v):
        return MARGIN["top"] + ph - (ty(v) - Y0) / (Y1 - Y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(plot.title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(xlo, xhi, plot.logx):
        x = px(v)
        out.append(f'<line x1="{x:.1f}" y1="{MARGIN["top"] + ph}" x2="{x:.1f}" y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{_fmt(v)}</text>')
    for v in _ticks(ylo, yhi, plot.logy):
        y = py(v)
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{y:.1f}" x2="{MARGIN["left"]}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{y + 4:.1f}" text-anchor="end">{_fmt(v)}</text>')
    out.append(
        f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(plot.xlabel)}</text>'
    )
    out.append(
        f'<text x="18" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {MARGIN["top"] + ph / 2:.1f})">{escape(plot.ylabel)}</text>'
    )
    for k, s in enumerate(plot.series):
        color = PALETTE[k % len(PALETTE)]
        keep = np.isfinite(s.x) & np.isfinite(s.y)
        if plot.logx:
            keep &= s.x > 0
        if plot.logy:
            keep &= s.y > 0
        pts = [(px(a), py(b)) for a, b in zip(s.x[keep], s.y[keep])]
        if not pts:
            continue
        path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        if s.markers:
            out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{color}"/>' for a, b in pts)
        ly = MARGIN["top"] + 14 + 18 * k
        lx = WIDTH - MARGIN["right"] + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write(plot: Plot, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render(plot))
