"""Tiny dependency-free SVG line plots for harness output."""

from __future__ import annotations

import math

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 34, 52


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s for s in (1 * mag, 2 * mag, 5 * mag, 10 * mag) if s >= raw)
    t0 = math.ceil(lo / step) * step
    out = []
    t = t0
    while t <= hi + 1e-12 * step:
        out.append(t)
        t += step
    return out


def line_plot(series: list[tuple], title: str, xlabel: str, ylabel: str,
              logy: bool = False) -> str:
    """Render (x, y, label) series to an SVG string.

    With logy=True nonpositive values are dropped from the plot.
    """
    pts = []
    for xs, ys, _ in series:
        for x, y in zip(xs, ys):
            if logy and y <= 0.0:
                continue
            pts.append((float(x), math.log10(y) if logy else float(y)))
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    xlo = min(p[0] for p in pts)
    xhi = max(p[0] for p in pts)
    ylo = min(p[1] for p in pts)
    yhi = max(p[1] for p in pts)
    if xhi <= xlo:
        xhi = xlo + 1.0
    if yhi <= ylo:
        yhi = ylo + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    def sx(x):
        return _ML + (x - xlo) / (xhi - xlo) * (_W - _ML - _MR)

    def sy(y):
        return _H - _MB - (y - ylo) / (yhi - ylo) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W/2:.1f}" y="20" text-anchor="middle" font-size="14" '
        f'font-family="sans-serif">{title}</text>',
    ]
    for xt in _ticks(xlo, xhi):
        parts.append(f'<line x1="{sx(xt):.1f}" y1="{_H-_MB}" x2="{sx(xt):.1f}" '
                     f'y2="{_H-_MB+5}" stroke="black"/>')
        parts.append(f'<text x="{sx(xt):.1f}" y="{_H-_MB+18}" text-anchor="middle" '
                     f'font-size="11" font-family="sans-serif">{xt:.4g}</text>')
    for yt in _ticks(ylo, yhi):
        label = f"1e{yt:.3g}" if logy else f"{yt:.4g}"
        parts.append(f'<line x1="{_ML-5}" y1="{sy(yt):.1f}" x2="{_ML}" '
                     f'y2="{sy(yt):.1f}" stroke="black"/>')
        parts.append(f'<text x="{_ML-8}" y="{sy(yt)+4:.1f}" text-anchor="end" '
                     f'font-size="11" font-family="sans-serif">{label}</text>')
    parts.append(f'<rect x="{_ML}" y="{_MT}" width="{_W-_ML-_MR}" '
                 f'height="{_H-_MT-_MB}" fill="none" stroke="black"/>')
    parts.append(f'<text x="{_W/2:.1f}" y="{_H-12}" text-anchor="middle" font-size="12" '
                 f'font-family="sans-serif">{xlabel}</text>')
    parts.append(f'<text x="16" y="{_H/2:.1f}" text-anchor="middle" font-size="12" '
                 f'font-family="sans-serif" transform="rotate(-90 16 {_H/2:.1f})">{ylabel}</text>')
    for idx, (xs, ys, label) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        coords = []
        for x, y in zip(xs, ys):
            if logy:
                if y <= 0.0:
                    continue
                y = math.log10(y)
            coords.append(f"{sx(float(x)):.2f},{sy(float(y)):.2f}")
        if coords:
            parts.append(f'<polyline points="{" ".join(coords)}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        if label:
            ly = _MT + 16 + 16 * idx
            parts.append(f'<line x1="{_W-_MR-130}" y1="{ly-4}" x2="{_W-_MR-105}" '
                         f'y2="{ly-4}" stroke="{color}" stroke-width="1.5"/>')
            parts.append(f'<text x="{_W-_MR-100}" y="{ly}" font-size="11" '
                         f'font-family="sans-serif">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
