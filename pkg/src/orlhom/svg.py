"""Minimal SVG line plots (no plotting dependency)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
W, H = 640, 420
ML, MR, MT, MB = 70, 20, 40, 55


def _tf(v, log):
    return math.log10(v) if log else v


def _ticks(lo, hi, log):
    if log:
        return [float(k) for k in range(math.floor(lo), math.ceil(hi) + 1)]
    if hi == lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / 4))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (m * step) <= 6:
            step *= m
            break
    start = math.ceil(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-12 * abs(step):
        out.append(v)
        v += step
    return out


def line_plot(path, series, title="", xlabel="", ylabel="", logx=False, logy=False) -> None:
    """Write ``series`` (list of ``(label, xs, ys)``) as an SVG polyline chart."""
    pts = []
    for _, xs, ys in series:
        for x, y in zip(xs, ys):
            if (logx and x <= 0) or (logy and y <= 0):
                continue
            if math.isfinite(x) and math.isfinite(y):
                pts.append((_tf(x, logx), _tf(y, logy)))
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    # ranges at rounding level would make the tick step vanish against the values
    if x1 - x0 <= 1e-9 * max(1.0, abs(x0), abs(x1)):
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 <= 1e-9 * max(1.0, abs(y0), abs(y1)):
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def X(v):
        return ML + (v - x0) / (x1 - x0) * (W - ML - MR)

    def Y(v):
        return H - MB - (v - y0) / (y1 - y0) * (H - MT - MB)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="15" font-family="sans-serif">{escape(title)}</text>',
        f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" stroke="black"/>',
        f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1, logx):
        if x0 <= t <= x1:
            lab = f"1e{int(t)}" if logx else f"{t:g}"
            out.append(f'<line x1="{X(t):.2f}" y1="{H - MB}" x2="{X(t):.2f}" y2="{H - MB + 5}" stroke="black"/>')
            out.append(f'<text x="{X(t):.2f}" y="{H - MB + 18}" text-anchor="middle" font-size="11" font-family="sans-serif">{lab}</text>')
    for t in _ticks(y0, y1, logy):
        if y0 <= t <= y1:
            lab = f"1e{int(t)}" if logy else f"{t:.4g}"
            out.append(f'<line x1="{ML - 5}" y1="{Y(t):.2f}" x2="{ML}" y2="{Y(t):.2f}" stroke="black"/>')
            out.append(f'<text x="{ML - 8}" y="{Y(t) + 4:.2f}" text-anchor="end" font-size="11" font-family="sans-serif">{lab}</text>')
    out.append(f'<text x="{(ML + W - MR) / 2}" y="{H - 12}" text-anchor="middle" font-size="13" font-family="sans-serif">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{(MT + H - MB) / 2}" text-anchor="middle" font-size="13" font-family="sans-serif" '
        f'transform="rotate(-90 16 {(MT + H - MB) / 2})">{escape(ylabel)}</text>'
    )
    for i, (label, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        coords = [
            f"{X(_tf(x, logx)):.2f},{Y(_tf(y, logy)):.2f}"
            for x, y in zip(xs, ys)
            if not ((logx and x <= 0) or (logy and y <= 0)) and math.isfinite(x) and math.isfinite(y)
        ]
        if coords:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{" ".join(coords)}"/>')
            for c in coords:
                cx, cy = c.split(",")
                out.append(f'<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>')
        out.append(
            f'<text x="{W - MR - 8}" y="{MT + 16 * (i + 1)}" text-anchor="end" font-size="12" '
            f'font-family="sans-serif" fill="{color}">{escape(label)}</text>'
        )
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
