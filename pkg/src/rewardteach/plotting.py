"""Dependency-free deterministic SVG charts.

Line charts keep curves in data coordinates under a group transform, so the
path data carries the plotted values themselves. Scatter plots use log-log
axes; the raw coordinates of each marker are kept in ``data-*`` attributes.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 78, 170, 30, 52
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _num(x: float) -> str:
    text = f"{x:.9g}"
    return "0" if text == "-0" else text


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + step * 1e-9:
        ticks.append(round(v, 12))
        v += step
    return ticks


def _padded(lo: float, hi: float) -> tuple[float, float]:
    if hi > lo:
        return lo, hi
    pad = abs(lo) * 0.5 if lo else 1.0
    return lo - pad, hi + pad


def _frame(title: str, xlabel: str, ylabel: str) -> list[str]:
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{LEFT + pw / 2:g}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444444"/>',
        f'<text x="{LEFT + pw / 2:g}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="16" y="{TOP + ph / 2:g}" text-anchor="middle" '
        f'transform="rotate(-90 16 {TOP + ph / 2:g})">{escape(ylabel)}</text>',
    ]


def _legend(labels: list[str]) -> list[str]:
    out = []
    x = WIDTH - RIGHT + 12
    for i, label in enumerate(labels):
        y = TOP + 12 + 18 * i
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{x}" y="{y - 8}" width="14" height="8" fill="{color}"/>')
        out.append(f'<text x="{x + 20}" y="{y}">{escape(label)}</text>')
    return out


def line_chart(curves: list[dict], title: str = "", xlabel: str = "t", ylabel: str = "") -> str:
    """Mean curves with shaded p10-p90 bands.

    Each curve is ``{"label", "t", "mean", "low", "high"}`` (sequences of equal length).
    """
    if not curves:
        raise ValueError("nothing to plot")
    xs = [x for c in curves for x in c["t"]]
    ys = [y for c in curves for key in ("mean", "low", "high") for y in c[key]]
    x0, x1 = _padded(min(xs), max(xs))
    y0, y1 = _padded(min(ys), max(ys))
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    sx, sy = pw / (x1 - x0), ph / (y1 - y0)

    parts = _frame(title, xlabel, ylabel)
    for v in _nice_ticks(x0, x1):
        px = LEFT + (v - x0) * sx
        parts.append(f'<line x1="{px:.2f}" y1="{TOP + ph}" x2="{px:.2f}" y2="{TOP + ph + 4}" stroke="#444444"/>')
        parts.append(f'<text x="{px:.2f}" y="{TOP + ph + 16}" text-anchor="middle">{_num(v)}</text>')
    for v in _nice_ticks(y0, y1):
        py = TOP + ph - (v - y0) * sy
        parts.append(f'<line x1="{LEFT - 4}" y1="{py:.2f}" x2="{LEFT}" y2="{py:.2f}" stroke="#444444"/>')
        parts.append(f'<text x="{LEFT - 7}" y="{py + 4:.2f}" text-anchor="end">{_num(v)}</text>')

    # data space -> pixels: px = LEFT + (x - x0) sx, py = TOP + ph - (y - y0) sy
    matrix = f"matrix({_num(sx)} 0 0 {_num(-sy)} {_num(LEFT - x0 * sx)} {_num(TOP + ph + y0 * sy)})"
    parts.append(f'<g transform="{matrix}">')
    for i, c in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        upper = " ".join(f"{_num(x)},{_num(y)}" for x, y in zip(c["t"], c["high"]))
        lower = " ".join(f"{_num(x)},{_num(y)}" for x, y in zip(reversed(c["t"]), reversed(c["low"])))
        parts.append(f'<polygon class="band" points="{upper} {lower}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        path = "M" + " L".join(f"{_num(x)},{_num(y)}" for x, y in zip(c["t"], c["mean"]))
        parts.append(f'<path class="mean" data-label="{escape(c["label"])}" d="{path}" fill="none" '
                     f'stroke="{color}" stroke-width="1.6" vector-effect="non-scaling-stroke"/>')
    parts.append("</g>")
    parts += _legend([c["label"] for c in curves])
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def scatter_chart(groups: list[dict], title: str = "", xlabel: str = "final regret",
                  ylabel: str = "final cost") -> str:
    """Log-log scatter. Each group is ``{"label", "x", "y"}``.

    Non-positive values are pinned to a floor a decade below the smallest
    positive value so they stay visible.
    """
    if not groups:
        raise ValueError("nothing to plot")
    pos = [v for g in groups for key in ("x", "y") for v in g[key] if v > 0]
    floor = min(pos) / 10 if pos else 1e-3
    lx = [math.log10(max(v, floor)) for g in groups for v in g["x"]]
    ly = [math.log10(max(v, floor)) for g in groups for v in g["y"]]
    if not lx:
        raise ValueError("nothing to plot")
    x0, x1 = math.floor(min(lx)), math.ceil(max(lx))
    y0, y1 = math.floor(min(ly)), math.ceil(max(ly))
    x1, y1 = max(x1, x0 + 1), max(y1, y0 + 1)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    sx, sy = pw / (x1 - x0), ph / (y1 - y0)

    parts = _frame(title, xlabel + " (log)", ylabel + " (log)")
    for d in range(x0, x1 + 1):
        px = LEFT + (d - x0) * sx
        parts.append(f'<line x1="{px:.2f}" y1="{TOP + ph}" x2="{px:.2f}" y2="{TOP + ph + 4}" stroke="#444444"/>')
        parts.append(f'<text x="{px:.2f}" y="{TOP + ph + 16}" text-anchor="middle">1e{d}</text>')
    for d in range(y0, y1 + 1):
        py = TOP + ph - (d - y0) * sy
        parts.append(f'<line x1="{LEFT - 4}" y1="{py:.2f}" x2="{LEFT}" y2="{py:.2f}" stroke="#444444"/>')
        parts.append(f'<text x="{LEFT - 7}" y="{py + 4:.2f}" text-anchor="end">1e{d}</text>')
    for i, g in enumerate(groups):
        color = PALETTE[i % len(PALETTE)]
        parts.append(f'<g class="series" data-label="{escape(g["label"])}" fill="{color}" fill-opacity="0.75">')
        for x, y in zip(g["x"], g["y"]):
            px = LEFT + (math.log10(max(x, floor)) - x0) * sx
            py = TOP + ph - (math.log10(max(y, floor)) - y0) * sy
            parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3" data-x="{_num(x)}" data-y="{_num(y)}"/>')
        parts.append("</g>")
    parts += _legend([g["label"] for g in groups])
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
