"""Minimal deterministic SVG line plots for sweep tables.

Hand-rolled on purpose: byte-identical output for identical input is part
of the contract, which rules out plotting libraries that embed timestamps
or generated ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

__all__ = ["PlotSpec", "emit_plot"]

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_MARKERS = ("circle", "square", "diamond", "triangle")


@dataclass
class PlotSpec:
    out_path: str
    title: str = ""
    xlabel: str = "n"
    ylabel: str = ""
    width: int = 640
    height: int = 480


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _ticks(lo: float, hi: float, target: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if span / step <= target + 1:
            break
    first = step * (int(lo / step) if lo >= 0 else int(lo / step) - 1)
    ticks = []
    t = first
    while t <= hi + step * 1e-9:
        if t >= lo - step * 1e-9:
            ticks.append(round(t, 12))
        t += step
    return ticks or [lo, hi]


def _marker(kind: str, x: float, y: float, color: str) -> str:
    if kind == "circle":
        return f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3.5" fill="{color}"/>'
    if kind == "square":
        return (
            f'<rect x="{_fmt(x - 3)}" y="{_fmt(y - 3)}" width="6" height="6" '
            f'fill="{color}"/>'
        )
    if kind == "diamond":
        pts = f"{_fmt(x)},{_fmt(y - 4)} {_fmt(x + 4)},{_fmt(y)} {_fmt(x)},{_fmt(y + 4)} {_fmt(x - 4)},{_fmt(y)}"
        return f'<polygon points="{pts}" fill="{color}"/>'
    pts = f"{_fmt(x)},{_fmt(y - 4)} {_fmt(x + 4)},{_fmt(y + 3)} {_fmt(x - 4)},{_fmt(y + 3)}"
    return f'<polygon points="{pts}" fill="{color}"/>'


def emit_plot(rows, spec: PlotSpec) -> Path:
    """Render one polyline per method (x = n, y = value) to an SVG file.

    rows are SweepRow-like records with method, n, and value fields; the
    output is valid SVG 1.1 and byte-deterministic for a fixed input.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("cannot plot an empty table")
    methods = sorted({r.method for r in rows})
    series = {
        m: sorted(((r.n, r.value) for r in rows if r.method == m))
        for m in methods
    }
    for m, pts in series.items():
        if not pts:
            raise ValueError(f"empty series for method {m!r}")

    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    pad = 0.05 * (y_hi - y_lo) or max(0.05 * abs(y_hi), 0.05)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    W, H = spec.width, spec.height
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = W - ml - mr, H - mt - mb

    def sx(x):
        return ml + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return mt + ph - (y - y_lo) / (y_hi - y_lo) * ph

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        'stroke="#333" stroke-width="1"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        px = sx(t)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{mt + ph}" x2="{_fmt(px)}" '
            f'y2="{mt + ph + 5}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{mt + ph + 18}" font-size="11" '
            f'text-anchor="middle" font-family="sans-serif">{_fmt(t)}</text>'
        )
    for t in _ticks(y_lo, y_hi):
        py = sy(t)
        parts.append(
            f'<line x1="{ml - 5}" y1="{_fmt(py)}" x2="{ml}" y2="{_fmt(py)}" '
            'stroke="#333"/>'
        )
        parts.append(
            f'<text x="{ml - 8}" y="{_fmt(py + 4)}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif">{_fmt(t)}</text>'
        )
    if spec.title:
        parts.append(
            f'<text x="{W // 2}" y="24" font-size="15" text-anchor="middle" '
            f'font-family="sans-serif">{spec.title}</text>'
        )
    parts.append(
        f'<text x="{ml + pw // 2}" y="{H - 12}" font-size="13" '
        f'text-anchor="middle" font-family="sans-serif">{spec.xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{mt + ph // 2}" font-size="13" text-anchor="middle" '
        f'font-family="sans-serif" transform="rotate(-90 16 {mt + ph // 2})">'
        f"{spec.ylabel}</text>"
    )

    for k, m in enumerate(methods):
        color = _PALETTE[k % len(_PALETTE)]
        marker = _MARKERS[k % len(_MARKERS)]
        pts = series[m]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            'stroke-width="1.8"/>'
        )
        for x, y in pts:
            parts.append(_marker(marker, sx(x), sy(y), color))
        ly = mt + 16 + 18 * k
        parts.append(
            f'<line x1="{ml + pw - 130}" y1="{ly - 4}" x2="{ml + pw - 105}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="1.8"/>'
        )
        parts.append(
            f'<text x="{ml + pw - 100}" y="{ly}" font-size="12" '
            f'font-family="sans-serif">{m}</text>'
        )
    parts.append("</svg>")
    svg = "\n".join(parts) + "\n"
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    return out
