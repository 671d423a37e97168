"""Self-contained SVG line plots of the diagnostics time series."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 360
LEFT, RIGHT, TOP, BOTTOM = 80, 20, 40, 50

# Column, title, logarithmic y axis.
PANELS = [
    ("min_star_omega", "min *Omega", False),
    ("max_lambda", "max singular value", True),
    ("min_area_margin", "min area margin", False),
    ("min_S_diag", "min S diagonal", False),
    ("max_A_sq", "max |A|^2", True),
    ("max_H_norm", "max |H|", True),
    ("max_normal_defect", "max normal defect", True),
    ("max_residual_34", "max residual", True),
]


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def line_plot_svg(x, y, *, title: str, xlabel: str = "t", log_y: bool = False) -> str:
    """One series as an SVG document; non-finite (or non-positive on a log axis) points are dropped."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y)
    if log_y:
        keep &= y > 0
    x, y = x[keep], y[keep]
    yv = np.log10(y) if log_y else y
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
    ]
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    parts.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    if x.size == 0:
        parts.append(f'<text x="{WIDTH / 2}" y="{HEIGHT / 2}" text-anchor="middle">no data</text></svg>')
        return "\n".join(parts)
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(yv.min()), float(yv.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        pad = 0.5 if log_y else max(abs(y0) * 0.05, 1e-12)
        y0, y1 = y0 - pad, y1 + pad

    def sx(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return TOP + ph - (v - y0) / (y1 - y0) * ph

    for v in _ticks(x0, x1):
        parts.append(f'<line x1="{sx(v):.2f}" y1="{TOP + ph}" x2="{sx(v):.2f}" y2="{TOP + ph + 5}" stroke="black"/>')
        parts.append(f'<text x="{sx(v):.2f}" y="{TOP + ph + 18}" text-anchor="middle">{v:g}</text>')
    yt = [float(v) for v in range(math.ceil(y0), math.floor(y1) + 1)] if log_y else _ticks(y0, y1)
    if log_y and len(yt) > 8:
        yt = yt[:: math.ceil(len(yt) / 8)]
    for v in yt:
        label = f"1e{int(v)}" if log_y else f"{v:.4g}"
        parts.append(f'<line x1="{LEFT - 5}" y1="{sy(v):.2f}" x2="{LEFT}" y2="{sy(v):.2f}" stroke="black"/>')
        parts.append(f'<line x1="{LEFT}" y1="{sy(v):.2f}" x2="{LEFT + pw}" y2="{sy(v):.2f}" stroke="#ddd"/>')
        parts.append(f'<text x="{LEFT - 8}" y="{sy(v) + 4:.2f}" text-anchor="end">{label}</text>')
    parts.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, yv))
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>')
    parts.append("</svg>")
    return "\n".join(parts)


def write_plots(columns: dict[str, np.ndarray], out_dir) -> list[Path]:
    """One SVG per diagnostic column against time; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, title, log_y in PANELS:
        if name not in columns:
            continue
        path = out / f"{name}.svg"
        path.write_text(line_plot_svg(columns["t"], columns[name], title=title, log_y=log_y) + "\n")
        written.append(path)
    return written
