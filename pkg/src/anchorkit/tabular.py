"""CSV serialization and a dependency-free SVG line plot.

Floats are written with ``repr`` (shortest round-trip form), so identical
runs produce byte-identical files and every emitted value re-parses exactly.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

from .errors import ConfigError


def format_csv(columns: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    lines = [",".join(columns)]
    width = len(columns)
    for row in rows:
        if len(row) != width:
            raise ConfigError(f"row width {len(row)} != header width {width}")
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_csv(text: str):
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        raise ConfigError("empty CSV")
    columns = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(columns):
            raise ConfigError("ragged CSV row")
        rows.append([float(c) for c in cells])
    return columns, rows


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd")
_W, _H = 640, 440
_ML, _MR, _MT, _MB = 70, 20, 20, 50


def _ticks(lo: float, hi: float):
    start = math.ceil(lo - 1e-9)
    stop = math.floor(hi + 1e-9)
    if stop < start:
        return [lo, hi]
    step = max(1, (stop - start) // 6)
    return list(range(start, stop + 1, step))


def render_loglog_svg(series: Sequence[tuple], x_label: str, y_label: str) -> str:
    """Render named (x, y) series as log-log polylines.

    Nonpositive points cannot appear on a log plot and are dropped.
    ``series`` holds (name, xs, ys) triples.
    """
    pts = []
    for _, xs, ys in series:
        pts.extend((math.log10(x), math.log10(y))
                   for x, y in zip(xs, ys) if x > 0 and y > 0)
    if not pts:
        raise ConfigError("nothing to plot: no positive points")
    lx = [p[0] for p in pts]
    ly = [p[1] for p in pts]
    x_lo, x_hi = min(lx), max(lx)
    y_lo, y_hi = min(ly), max(ly)
    if x_hi - x_lo < 1e-12:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi - y_lo < 1e-12:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    def px(v):
        return _ML + (v - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)

    def py(v):
        return _H - _MB - (v - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
        'stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
    ]
    for tv in _ticks(x_lo, x_hi):
        x = px(tv)
        parts.append(f'<line x1="{x:.1f}" y1="{_H - _MB}" x2="{x:.1f}" '
                     f'y2="{_H - _MB + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{_H - _MB + 18}" font-size="11" '
                     f'text-anchor="middle">1e{tv:d}</text>' if isinstance(tv, int)
                     else "")
    for tv in _ticks(y_lo, y_hi):
        y = py(tv)
        parts.append(f'<line x1="{_ML - 5}" y1="{y:.1f}" x2="{_ML}" y2="{y:.1f}" '
                     'stroke="black"/>')
        parts.append(f'<text x="{_ML - 8}" y="{y + 4:.1f}" font-size="11" '
                     f'text-anchor="end">1e{tv:d}</text>' if isinstance(tv, int)
                     else "")
    parts.append(f'<text x="{(_ML + _W - _MR) / 2:.0f}" y="{_H - 12}" '
                 f'font-size="13" text-anchor="middle">{x_label}</text>')
    parts.append(f'<text x="16" y="{(_MT + _H - _MB) / 2:.0f}" font-size="13" '
                 f'text-anchor="middle" transform="rotate(-90 16 '
                 f'{(_MT + _H - _MB) / 2:.0f})">{y_label}</text>')
    for idx, (name, xs, ys) in enumerate(series):
        color = _SVG_COLORS[idx % len(_SVG_COLORS)]
        coords = " ".join(f"{px(math.log10(x)):.2f},{py(math.log10(y)):.2f}"
                          for x, y in zip(xs, ys) if x > 0 and y > 0)
        if coords:
            parts.append(f'<polyline points="{coords}" fill="none" '
                         f'stroke="{color}" stroke-width="1.3"/>')
            parts.append(f'<text x="{_W - _MR - 6}" y="{_MT + 16 + 14 * idx}" '
                         f'font-size="12" text-anchor="end" fill="{color}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(p for p in parts if p) + "\n"
