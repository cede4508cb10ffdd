"""Dependency-free SVG line charts with variance bands and reference lines."""
from dataclasses import dataclass, field
import math
from xml.sax.saxutils import escape

import numpy as np

COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"]
REF_COLORS = {"CB": "#555555", "MP": "#2ca02c"}


@dataclass
class PlotSpec:
    title: str
    x_label: str
    y_label: str
    x: np.ndarray
    series: list = field(default_factory=list)      # (label, y)
    band: tuple = None                              # (lower, upper)
    ref_lines: list = field(default_factory=list)   # (label, value)


def _nice_ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 10))
        v += step
    return ticks


def render(spec, width=900, height=420):
    """Return the chart as an SVG document string."""
    left, right, top, bottom = 70, 120, 40, 55
    pw, ph = width - left - right, height - top - bottom
    x = np.asarray(spec.x, dtype=np.float64)
    ys = [np.asarray(y, dtype=np.float64) for _, y in spec.series]
    vals = [v for y in ys for v in y[np.isfinite(y)]]
    if spec.band is not None:
        vals += [v for b in spec.band for v in np.asarray(b)[np.isfinite(b)]]
    vals += [v for _, v in spec.ref_lines]
    y_lo, y_hi = (min(vals), max(vals)) if vals else (0.0, 1.0)
    pad = 0.05 * (y_hi - y_lo or 1.0)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    x_lo, x_hi = (float(x[0]), float(x[-1])) if x.size else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    def px(v):
        return left + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return top + (y_hi - v) / (y_hi - y_lo) * ph

    def pts(xs, yv):
        return " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, yv) if math.isfinite(b))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(spec.title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>',
    ]
    for t in _nice_ticks(y_lo, y_hi):
        out.append(f'<line class="grid" x1="{left}" y1="{py(t):.2f}" x2="{left + pw}" y2="{py(t):.2f}" stroke="#eeeeee"/>')
        out.append(f'<text x="{left - 6}" y="{py(t) + 4:.2f}" text-anchor="end">{t:g}</text>')
    for t in _nice_ticks(x_lo, x_hi):
        out.append(f'<text x="{px(t):.2f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(spec.x_label)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(spec.y_label)}</text>')

    if spec.band is not None:
        lo, hi = (np.asarray(b, dtype=np.float64) for b in spec.band)
        poly = pts(x, hi) + " " + pts(x[::-1], lo[::-1])
        out.append(f'<polygon class="band" points="{poly}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>')
    for label, value in spec.ref_lines:
        color = REF_COLORS.get(label, "#555555")
        out.append(f'<line class="refline" x1="{left}" y1="{py(value):.2f}" x2="{left + pw}" y2="{py(value):.2f}" '
                   f'stroke="{color}" stroke-dasharray="6,4"/>')
        out.append(f'<text x="{left + pw + 6}" y="{py(value) + 4:.2f}" fill="{color}">'
                   f'{escape(label)} {value:.2f}</text>')
    for k, ((label, _), y) in enumerate(zip(spec.series, ys)):
        color = COLORS[k % len(COLORS)]
        out.append(f'<polyline class="series" points="{pts(x, y)}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = top + ph - 6 - 16 * (len(ys) - 1 - k)
        out.append(f'<text x="{left + pw + 6}" y="{ly}" fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write(spec, path, **kw):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render(spec, **kw))
