"""Minimal SVG emission for sweep results. No plotting dependency needed."""

from __future__ import annotations

import numpy as np

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 20, 50

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _scale(vals, lo, hi, out_lo, out_hi):
    vals = np.asarray(vals, dtype=float)
    span = hi - lo if hi > lo else 1.0
    return out_lo + (vals - lo) / span * (out_hi - out_lo)


def line_plot(path, x, series, *, xlabel="", ylabel="", title=""):
    """Simple multi-series line plot. ``series`` is [(label, y-array), ...]."""
    x = np.asarray(x, dtype=float)
    ys = np.concatenate([np.asarray(y, dtype=float) for _, y in series])
    x_lo, x_hi = float(x.min()), float(x.max())
    y_lo, y_hi = float(min(ys.min(), 0.0)), float(ys.max() * 1.05 or 1.0)
    px = _scale(x, x_lo, x_hi, _ML, _W - _MR)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             f'<text x="{_W / 2:.0f}" y="14" text-anchor="middle" font-size="13">{title}</text>']
    # axes
    parts.append(f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>')
    parts.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        xp = _ML + frac * (_W - _ML - _MR)
        parts.append(f'<text x="{xp:.1f}" y="{_H - _MB + 16}" text-anchor="middle" '
                     f'font-size="10">{xv:.3g}</text>')
        yv = y_lo + frac * (y_hi - y_lo)
        yp = _H - _MB - frac * (_H - _MT - _MB)
        parts.append(f'<text x="{_ML - 6}" y="{yp:.1f}" text-anchor="end" '
                     f'font-size="10">{yv:.3g}</text>')
    parts.append(f'<text x="{_W / 2:.0f}" y="{_H - 12}" text-anchor="middle" '
                 f'font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{_H / 2:.0f}" text-anchor="middle" font-size="12" '
                 f'transform="rotate(-90 16 {_H / 2:.0f})">{ylabel}</text>')
    for s, (label, y) in enumerate(series):
        py = _scale(np.asarray(y, dtype=float), y_lo, y_hi, _H - _MB, _MT)
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px, py))
        color = _COLORS[s % len(_COLORS)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{_W - _MR - 4}" y="{_MT + 14 * (s + 1)}" text-anchor="end" '
                     f'font-size="11" fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))


def heatmap(path, matrix, row_labels, col_labels, *, xlabel="", ylabel="", title=""):
    """Grayscale-to-blue heatmap of a 2-d matrix (NaN cells hatched gray)."""
    matrix = np.asarray(matrix, dtype=float)
    n_rows, n_cols = matrix.shape
    finite = matrix[np.isfinite(matrix)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    span = hi - lo if hi > lo else 1.0
    cw = (_W - _ML - _MR) / n_cols
    ch = (_H - _MT - _MB) / n_rows

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             f'<text x="{_W / 2:.0f}" y="14" text-anchor="middle" font-size="13">{title}</text>']
    for i in range(n_rows):
        for j in range(n_cols):
            x0 = _ML + j * cw
            y0 = _MT + i * ch
            v = matrix[i, j]
            if np.isfinite(v):
                t = (v - lo) / span
                r, g = int(255 * (1 - t)), int(255 * (1 - 0.6 * t))
                fill = f"rgb({r},{g},255)"
            else:
                fill = "rgb(200,200,200)"
            parts.append(f'<rect x="{x0:.1f}" y="{y0:.1f}" width="{cw:.1f}" height="{ch:.1f}" '
                         f'fill="{fill}" stroke="white" stroke-width="0.5"/>')
            if np.isfinite(v):
                parts.append(f'<text x="{x0 + cw / 2:.1f}" y="{y0 + ch / 2 + 3:.1f}" '
                             f'text-anchor="middle" font-size="9">{v:.3g}</text>')
    for j, lab in enumerate(col_labels):
        parts.append(f'<text x="{_ML + (j + 0.5) * cw:.1f}" y="{_H - _MB + 16}" '
                     f'text-anchor="middle" font-size="10">{lab}</text>')
    for i, lab in enumerate(row_labels):
        parts.append(f'<text x="{_ML - 6}" y="{_MT + (i + 0.5) * ch + 3:.1f}" '
                     f'text-anchor="end" font-size="10">{lab}</text>')
    parts.append(f'<text x="{_W / 2:.0f}" y="{_H - 12}" text-anchor="middle" '
                 f'font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{_H / 2:.0f}" text-anchor="middle" font-size="12" '
                 f'transform="rotate(-90 16 {_H / 2:.0f})">{ylabel}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))
