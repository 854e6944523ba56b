"""Minimal SVG emitters for landscape heatmaps and rate curves.

Color scale: losses are mapped linearly from the grid minimum (first stop)
to the grid maximum (last stop) through the fixed palette :data:`PALETTE`,
interpolated in RGB.  Zone balls are drawn as white circles.
"""
from __future__ import annotations

import numpy as np

PALETTE = ("#440154", "#3b528b", "#21918c", "#5ec962", "#fde725")

CELL_PX = 6
MARGIN = 40


def _rgb(hex_color):
    return np.array([int(hex_color[i:i + 2], 16) for i in (1, 3, 5)], dtype=float)


_STOPS = np.array([_rgb(c) for c in PALETTE])


def color_for(t: float) -> str:
    """Palette color at position ``t`` in ``[0, 1]``."""
    t = min(1.0, max(0.0, float(t)))
    pos = t * (len(_STOPS) - 1)
    i = min(int(pos), len(_STOPS) - 2)
    frac = pos - i
    c = (1 - frac) * _STOPS[i] + frac * _STOPS[i + 1]
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def heatmap_svg(report, timestamp: str | None = None) -> str:
    """Render a :class:`~onebitgen.landscape.LandscapeReport` as SVG text."""
    loss = report.loss
    n1, n2 = loss.shape
    lo, hi = float(loss.min()), float(loss.max())
    span = hi - lo if hi > lo else 1.0
    width = n1 * CELL_PX + 2 * MARGIN
    height = n2 * CELL_PX + 2 * MARGIN
    a_lo, a_hi = float(report.axis1[0]), float(report.axis1[-1])
    b_lo, b_hi = float(report.axis2[0]), float(report.axis2[-1])
    sx = n1 * CELL_PX / (a_hi - a_lo)
    sy = n2 * CELL_PX / (b_hi - b_lo)

    def px(x1, x2):
        return MARGIN + (x1 - a_lo) * sx, MARGIN + (b_hi - x2) * sy

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
    ]
    if timestamp:
        out.append(f"<!-- generated {timestamp} -->")
    out.append(f'<title>{report.mode} risk landscape, loss range [{lo:.6g}, {hi:.6g}]</title>')
    half = CELL_PX / 2
    for i in range(n1):
        for j in range(n2):
            cx, cy = px(report.axis1[i], report.axis2[j])
            fill = color_for((loss[i, j] - lo) / span)
            out.append(f'<rect x="{cx - half:.2f}" y="{cy - half:.2f}" width="{CELL_PX}" '
                       f'height="{CELL_PX}" fill="{fill}"/>')
    x0 = report.x0
    delta_check, delta_1, delta_2 = report.zone_radii.as_tuple()
    for centre, r in ((x0, delta_1), (-report.rho_n * x0, delta_2), (np.zeros(2), delta_check)):
        cx, cy = px(centre[0], centre[1])
        out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r * sx:.2f}" fill="none" '
                   f'stroke="white" stroke-width="1.5"/>')
    out.append(f'<text x="{MARGIN}" y="{MARGIN / 2:.0f}" font-size="12">'
               f'{report.mode}: x0=({x0[0]:.3g}, {x0[1]:.3g}), rho_n={report.rho_n:.6f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def rate_curve_svg(rows, timestamp: str | None = None, size: int = 400) -> str:
    """Log-log plot of median relative error against ``m`` with the quartile band."""
    ms = np.log2([r.m for r in rows])
    med = np.log10([max(r.median_rel_error, 1e-300) for r in rows])
    q25 = np.log10([max(r.q25, 1e-300) for r in rows])
    q75 = np.log10([max(r.q75, 1e-300) for r in rows])
    x_lo, x_hi = ms.min(), max(ms.max(), ms.min() + 1)
    y_lo, y_hi = min(q25.min(), med.min()), max(q75.max(), med.max())
    if y_hi <= y_lo:
        y_hi = y_lo + 1
    inner = size - 2 * MARGIN

    def px(a, b):
        return MARGIN + (a - x_lo) / (x_hi - x_lo) * inner, MARGIN + (y_hi - b) / (y_hi - y_lo) * inner

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
    ]
    if timestamp:
        out.append(f"<!-- generated {timestamp} -->")
    band = [px(a, b) for a, b in zip(ms, q75)] + [px(a, b) for a, b in zip(ms[::-1], q25[::-1])]
    out.append('<polygon fill="#21918c" fill-opacity="0.3" points="'
               + " ".join(f"{a:.2f},{b:.2f}" for a, b in band) + '"/>')
    out.append('<polyline fill="none" stroke="#440154" stroke-width="2" points="'
               + " ".join("%.2f,%.2f" % px(a, b) for a, b in zip(ms, med)) + '"/>')
    out.append(f'<text x="{MARGIN}" y="{size - 10}" font-size="12">log2 m from {x_lo:.0f} to '
               f'{x_hi:.0f}; log10 median error from {y_lo:.2f} to {y_hi:.2f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
