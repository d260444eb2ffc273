"""Minimal static SVG plot of an order-statistic path against its threshold."""

from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["plot_crossings", "plot_crossing_csv", "read_crossing_csv"]

WIDTH, HEIGHT, PAD = 900, 420, 50
MAX_POINTS = 4000


def _thin(t: np.ndarray, y: np.ndarray):
    """Keep per-bucket min and max so long series stay visually faithful."""
    if t.size <= MAX_POINTS:
        return t, y
    edges = np.linspace(0, t.size, MAX_POINTS // 2 + 1).astype(int)
    keep = []
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            seg = y[a:b]
            keep.extend(sorted({a + int(seg.argmin()), a + int(seg.argmax())}))
    idx = np.asarray(keep)
    return t[idx], y[idx]


def plot_crossings(t, x, f, crossed, title: str = "") -> str:
    """SVG text: ``x`` (path), ``f`` (threshold) and a marker at each crossed grid point."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    crossed = np.asarray(crossed, dtype=bool)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
             f'viewBox="0 0 {WIDTH} {HEIGHT}">',
             '<rect width="100%" height="100%" fill="white"/>']
    if title:
        parts.append(f'<text x="{PAD}" y="{PAD / 2:.0f}" font-family="sans-serif" '
                     f'font-size="14">{escape(title)}</text>')
    if t.size:
        lo = float(min(x.min(), f.min()))
        hi = float(max(x.max(), f.max()))
        if hi <= lo:
            hi = lo + 1.0
        t0, t1 = float(t[0]), float(t[-1]) if t[-1] > t[0] else float(t[0]) + 1.0

        def sx(v):
            return PAD + (np.asarray(v) - t0) / (t1 - t0) * (WIDTH - 2 * PAD)

        def sy(v):
            return HEIGHT - PAD - (np.asarray(v) - lo) / (hi - lo) * (HEIGHT - 2 * PAD)

        def poly(tt, yy, colour, cls):
            tt, yy = _thin(tt, yy)
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(sx(tt), sy(yy)))
            return f'<polyline class="{cls}" fill="none" stroke="{colour}" stroke-width="1" points="{pts}"/>'

        parts.append(f'<rect x="{PAD}" y="{PAD}" width="{WIDTH - 2 * PAD}" height="{HEIGHT - 2 * PAD}" '
                     'fill="none" stroke="#888"/>')
        parts.append(poly(t, x, "#1f5fa8", "path"))
        parts.append(poly(t, f, "#c0392b", "threshold"))
        for a, b in zip(sx(t[crossed]), sy(x[crossed])):
            parts.append(f'<circle class="crossing" cx="{a:.2f}" cy="{b:.2f}" r="3" fill="#c0392b"/>')
        for v, anchor in ((t0, "start"), (t1, "end")):
            parts.append(f'<text x="{sx(v):.2f}" y="{HEIGHT - PAD / 3:.0f}" font-family="sans-serif" '
                         f'font-size="11" text-anchor="{anchor}">t = {v:.6g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def read_crossing_csv(filename):
    """Arrays ``t, x_value, f_p, crossed`` from a crossing CSV."""
    with open(Path(filename), newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"t", "x_value", "f_p", "crossed"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ValueError(f"crossing CSV needs columns {sorted(need)}")
        rows = list(reader)
    t = np.array([float(r["t"]) for r in rows])
    x = np.array([float(r["x_value"]) for r in rows])
    f = np.array([float(r["f_p"]) for r in rows])
    c = np.array([r["crossed"].strip().lower() in ("1", "true") for r in rows], dtype=bool)
    return t, x, f, c


def plot_crossing_csv(csv_path, svg_path, title: str = "") -> int:
    """Render a crossing CSV to SVG; returns the number of markers drawn."""
    t, x, f, c = read_crossing_csv(csv_path)
    Path(svg_path).write_text(plot_crossings(t, x, f, c, title))
    return int(c.sum())
