"""Minimal, deterministic SVG line and scatter plots."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=40, bottom=55)


@dataclass
class Series:
    label: str
    xs: Sequence[float]
    ys: Sequence[float]
    yerr: Sequence[float] | None = None
    style: str = "line"  # "line" or "scatter"


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    raw = (hi - lo) / max(target - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        if v >= lo - 1e-9 * step:
            ticks.append(round(v, 10))
        v += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def render_svg(series: Sequence[Series], title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    if not series or all(len(s.xs) == 0 for s in series):
        raise ValueError("nothing to plot")
    pts = [(x, y, (s.yerr[i] if s.yerr is not None else 0.0))
           for s in series for i, (x, y) in enumerate(zip(s.xs, s.ys)) if math.isfinite(y)]
    xs = [p[0] for p in pts]
    ylo = min(p[1] - p[2] for p in pts)
    yhi = max(p[1] + p[2] for p in pts)
    xticks = nice_ticks(min(xs), max(xs))
    yticks = nice_ticks(ylo, yhi)
    x0, x1 = min(xticks[0], min(xs)), max(xticks[-1], max(xs))
    y0, y1 = min(yticks[0], ylo), max(yticks[-1], yhi)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in xticks:
        X = sx(t)
        out.append(f'<line x1="{X:.2f}" y1="{MARGIN["top"] + ph}" x2="{X:.2f}" y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{MARGIN["top"] + ph + 19}" text-anchor="middle">{_fmt(t)}</text>')
    for t in yticks:
        Y = sy(t)
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{Y:.2f}" x2="{MARGIN["left"]}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    if title:
        out.append(f'<text x="{MARGIN["left"] + pw / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{MARGIN["left"] + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        cy = MARGIN["top"] + ph / 2
        out.append(f'<text x="18" y="{cy:.2f}" text-anchor="middle" transform="rotate(-90 18 {cy:.2f})">{escape(ylabel)}</text>')

    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        data = [(x, y) for x, y in zip(s.xs, s.ys) if math.isfinite(y)]
        if s.style == "line" and len(data) >= 1:
            coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in data)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.8"/>')
        elif s.style == "scatter":
            for x, y in data:
                out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3.5" fill="{color}"/>')
        if s.yerr is not None:
            for x, y, e in zip(s.xs, s.ys, s.yerr):
                if math.isfinite(y) and math.isfinite(e) and e > 0:
                    out.append(f'<line x1="{sx(x):.2f}" y1="{sy(y - e):.2f}" x2="{sx(x):.2f}" y2="{sy(y + e):.2f}" '
                               f'stroke="{color}"/>')
        ly = MARGIN["top"] + 14 + 18 * k
        lx = MARGIN["left"] + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(series: Sequence[Series], kind: str, path, title: str = "", xlabel: str = "", ylabel: str = "",
              fit=None, fit_label: str = "fit") -> None:
    """Write ``line`` or ``scatter+fit`` plots; ``fit`` is a FitResult drawn over the data range."""
    series = list(series)
    if not series:
        raise ValueError("empty series list")
    if kind == "scatter+fit":
        series = [Series(s.label, s.xs, s.ys, s.yerr, "scatter") for s in series]
        if fit is not None:
            xs = [x for s in series for x in s.xs]
            lo, hi = min(xs), max(xs)
            grid = [lo + (hi - lo) * i / 100 for i in range(101)]
            series.append(Series(fit_label, grid, [float(v) for v in fit.predict(grid)], None, "line"))
    elif kind != "line":
        raise ValueError(f"unknown plot kind {kind!r}")
    svg = render_svg(series, title, xlabel, ylabel)
    with open(path, "w") as fh:
        fh.write(svg)
