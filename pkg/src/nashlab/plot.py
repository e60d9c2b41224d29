"""Dependency-free SVG charts of cumulative regret (linear-x and log-x panels)."""

from __future__ import annotations

import csv
import math
from pathlib import Path

PANEL_W, PANEL_H = 420.0, 300.0
MARGIN = 50.0


def load_curve(path):
    """(k, cumulative regret) columns from a per-seed or aggregate regret CSV."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "k":
            raise ValueError(f"{path}: malformed CSV header {header!r}")
        col = "cum_regret" if "cum_regret" in header else "cum_regret_mean"
        if col not in header:
            raise ValueError(f"{path}: no cumulative regret column")
        j = header.index(col)
        ks, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                ks.append(float(row[0]))
                ys.append(float(row[j]))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from exc
    if not ks:
        raise ValueError(f"{path}: no data rows")
    if min(ks) <= 0:
        raise ValueError(f"{path}: episode indices must be positive")
    return ks, ys


def _scale(v, lo, hi, out_lo, out_hi):
    if hi == lo:
        return (out_lo + out_hi) / 2.0
    return out_lo + (v - lo) * (out_hi - out_lo) / (hi - lo)


def panel_points(ks, ys, log_x: bool, x0: float):
    """Pixel coordinates of the polyline for one panel whose left edge is ``x0``."""
    xs = [math.log10(k) for k in ks] if log_x else list(ks)
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    left, right = x0 + MARGIN, x0 + PANEL_W - 10.0
    top, bottom = 20.0, PANEL_H - MARGIN
    return [
        (_scale(x, xlo, xhi, left, right), _scale(y, ylo, yhi, bottom, top))
        for x, y in zip(xs, ys)
    ]


def _panel(ks, ys, log_x, x0, title):
    pts = panel_points(ks, ys, log_x, x0)
    left, right = x0 + MARGIN, x0 + PANEL_W - 10.0
    top, bottom = 20.0, PANEL_H - MARGIN
    coords = " ".join(f"{x:.3f},{y:.3f}" for x, y in pts)
    kmin, kmax = min(ks), max(ks)
    return "\n".join([
        f'<g class="panel">',
        f'<rect x="{left:.3f}" y="{top:.3f}" width="{right - left:.3f}" height="{bottom - top:.3f}" fill="none" stroke="#888"/>',
        f'<text x="{(left + right) / 2:.3f}" y="14" text-anchor="middle" font-size="12">{title}</text>',
        f'<text x="{left:.3f}" y="{bottom + 16:.3f}" font-size="10">{kmin:g}</text>',
        f'<text x="{right:.3f}" y="{bottom + 16:.3f}" font-size="10" text-anchor="end">{kmax:g}</text>',
        f'<text x="{left - 4:.3f}" y="{bottom:.3f}" font-size="10" text-anchor="end">{min(ys):.4g}</text>',
        f'<text x="{left - 4:.3f}" y="{top + 8:.3f}" font-size="10" text-anchor="end">{max(ys):.4g}</text>',
        f'<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{coords}"/>',
        "</g>",
    ])


def render_svg(ks, ys, title: str = "cumulative regret") -> str:
    width = 2 * PANEL_W
    body = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{PANEL_H:.0f}" viewBox="0 0 {width:.0f} {PANEL_H:.0f}">',
        f"<title>{title}</title>",
        _panel(ks, ys, False, 0.0, "cumulative regret vs episode"),
        _panel(ks, ys, True, PANEL_W, "cumulative regret vs episode (log x)"),
        "</svg>",
    ]
    return "\n".join(body) + "\n"


def plot_csv(in_path, out_path) -> None:
    ks, ys = load_curve(in_path)
    Path(out_path).write_text(render_svg(ks, ys), newline="\n")
