"""Dependency-free SVG line plots of a report's gain, S11 and NF curves."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 220
PAD = 48
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _panel(x, y, top: int, title: str, color: str, band=None) -> list:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    finite = np.isfinite(y)
    lo, hi = (float(y[finite].min()), float(y[finite].max())) if finite.any() else (0.0, 1.0)
    if hi - lo < 1e-9:
        lo, hi = lo - 1.0, hi + 1.0
    x0, x1 = float(x.min()), float(x.max())
    span_x = x1 - x0 if x1 > x0 else 1.0
    w, h = WIDTH - 2 * PAD, HEIGHT - 2 * PAD

    def sx(v):
        return PAD + (v - x0) / span_x * w

    def sy(v):
        return top + PAD + (hi - v) / (hi - lo) * h

    out = [f'<g class="panel"><text x="{PAD}" y="{top + PAD - 12}" font-size="13">{escape(title)}</text>',
           f'<rect x="{PAD}" y="{top + PAD}" width="{w}" height="{h}" fill="none" stroke="#999"/>']
    if band:
        bl, bh = band
        out.append(f'<rect x="{sx(bl):.2f}" y="{top + PAD}" width="{sx(bh) - sx(bl):.2f}" height="{h}" '
                   f'fill="#eee" stroke="none"/>')
    for v, anchor in ((lo, top + PAD + h), (hi, top + PAD + 10)):
        out.append(f'<text x="{PAD - 4}" y="{anchor}" font-size="10" text-anchor="end">{v:.1f}</text>')
    out.append(f'<text x="{PAD}" y="{top + PAD + h + 14}" font-size="10">{x0:.2f} GHz</text>')
    out.append(f'<text x="{PAD + w}" y="{top + PAD + h + 14}" font-size="10" text-anchor="end">{x1:.2f} GHz</text>')
    pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y) if math.isfinite(b))
    out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/></g>')
    return out


def report_svg(report: dict, title: str = "") -> str:
    """Gain, S11 and NF against frequency, one panel and one polyline each."""
    f = report["freq_grid"]
    band = report.get("band_ghz") or None
    curves = [("Gain (dB)", report["gain_db"]), ("S11 (dB)", report["s11_db"])]
    if report.get("nf_curve_db"):
        curves.append(("NF (dB)", report["nf_curve_db"]))
    height = HEIGHT * len(curves) + (24 if title else 0)
    off = 24 if title else 0
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
             f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">']
    if title:
        parts.append(f'<text x="{WIDTH / 2}" y="18" font-size="15" text-anchor="middle">{escape(title)}</text>')
    for i, (name, ys) in enumerate(curves):
        parts.extend(_panel(f, ys, off + i * HEIGHT, name, COLORS[i % len(COLORS)], band))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_report_svg(report: dict, path, title: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(report_svg(report, title))
