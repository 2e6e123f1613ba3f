"""Minimal deterministic SVG line plots (CSV stays the source of truth)."""

from __future__ import annotations

import math
from pathlib import Path

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def write_line_plot(
    path: str | Path,
    xs: list[float],
    series: dict[str, list[float | None]],
    title: str,
    xlabel: str,
    ylabel: str,
) -> None:
    """Plot one or more y-series over shared x values; non-finite points are skipped."""
    pts = []
    for ys in series.values():
        for x, y in zip(xs, ys):
            if y is not None and math.isfinite(y):
                pts.append((x, y))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="monospace" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    if pts:
        x_lo, x_hi = min(p[0] for p in pts), max(p[0] for p in pts)
        y_lo, y_hi = min(p[1] for p in pts), max(p[1] for p in pts)
        if x_hi == x_lo:
            x_hi = x_lo + 1.0
        if y_hi == y_lo:
            y_hi = y_lo + 1.0

        def px(x: float) -> float:
            return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

        def py(y: float) -> float:
            return MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

        parts.append(
            f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
            'fill="none" stroke="#333"/>'
        )
        for t in _ticks(x_lo, x_hi):
            parts.append(
                f'<text x="{_fmt(px(t))}" y="{HEIGHT - MARGIN_B + 18}" '
                f'text-anchor="middle">{t:g}</text>'
            )
        for t in _ticks(y_lo, y_hi):
            parts.append(
                f'<text x="{MARGIN_L - 6}" y="{_fmt(py(t) + 4)}" text-anchor="end">{t:.4g}</text>'
            )
        for color, (name, ys) in zip(COLORS, sorted(series.items())):
            coords = [
                f"{_fmt(px(x))},{_fmt(py(y))}"
                for x, y in zip(xs, ys)
                if y is not None and math.isfinite(y)
            ]
            if coords:
                parts.append(
                    f'<polyline points="{" ".join(coords)}" fill="none" '
                    f'stroke="{color}" stroke-width="1.5"/>'
                )
        for i, (color, name) in enumerate(zip(COLORS, sorted(series))):
            y = MARGIN_T + 14 + 16 * i
            parts.append(f'<rect x="{MARGIN_L + 8}" y="{y - 9}" width="10" height="10" fill="{color}"/>')
            parts.append(f'<text x="{MARGIN_L + 22}" y="{y}">{name}</text>')
    else:
        parts.append(
            f'<text x="{WIDTH / 2}" y="{HEIGHT / 2}" text-anchor="middle">no finite data</text>'
        )
    parts.append(
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {HEIGHT / 2})">{ylabel}</text>'
    )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
