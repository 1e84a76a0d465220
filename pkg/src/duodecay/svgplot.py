"""Minimal SVG line plots, written by hand so no plotting library is needed."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b")
DASHES = ("", "6,3", "2,2", "8,3,2,3")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * step:
        out.append(0.0 if abs(v) < 1e-14 * step else v)
        v += step
    return out


def _label(v):
    return format(v, ".4g")


def line_plot(series, title="", xlabel="t", ylabel="", log_y=False, width=640, height=400):
    """``series`` is a list of (label, x, y); returns the SVG document as a string."""
    ml, mr, mt, mb = 70, 150, 30, 50
    pw, ph = width - ml - mr, height - mt - mb
    xs, ys = [], []
    clean = []
    for label, x, y in series:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if log_y:
            ok = y > 0
            x, y = x[ok], np.log10(y[ok])
        ok = np.isfinite(x) & np.isfinite(y)
        x, y = x[ok], y[ok]
        if x.size:
            xs.append(x)
            ys.append(y)
        clean.append((label, x, y))
    if xs:
        x0, x1 = min(a.min() for a in xs), max(a.max() for a in xs)
        y0, y1 = min(a.min() for a in ys), max(a.max() for a in ys)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        X = px(v)
        out.append(f'<line x1="{X:.2f}" y1="{mt + ph}" x2="{X:.2f}" y2="{mt + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{mt + ph + 16}" text-anchor="middle">{_label(v)}</text>')
    for v in _ticks(y0, y1):
        Y = py(v)
        txt = f"1e{_label(v)}" if log_y else _label(v)
        out.append(f'<line x1="{ml - 4}" y1="{Y:.2f}" x2="{ml}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 6}" y="{Y + 4:.2f}" text-anchor="end">{escape(txt)}</text>')
    if title:
        out.append(f'<text x="{ml + pw / 2:.2f}" y="{mt - 10}" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<text x="{ml + pw / 2:.2f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{mt + ph / 2:.2f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {mt + ph / 2:.2f})">{escape(ylabel)}</text>')
    for i, (label, x, y) in enumerate(clean):
        color = PALETTE[i % len(PALETTE)]
        dash = DASHES[(i // len(PALETTE) + i) % len(DASHES)]
        if x.size:
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
            style = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<path d="M {pts.replace(" ", " L ")}" fill="none" stroke="{color}" '
                       f'stroke-width="1.5"{style}/>')
        ly = mt + 14 + 16 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 34}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
