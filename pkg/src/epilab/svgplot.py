"""Self-contained SVG emission: heatmaps, curve plots, segment overlays.

No plotting dependency; output is deterministic for equal inputs (fixed
canvas geometry, explicit float formatting, a fixed color table, and no
timestamps), so artifacts can be compared structurally across reruns.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

CANVAS = 640
MARGIN = 56

SERIES_COLORS = ("#1f6fb2", "#d1495b", "#3a7d44", "#8e5fa2", "#c77f2e")

# sequential color ramp anchors (position, rgb)
HEAT_STOPS = (
    (0.00, (18, 17, 74)),
    (0.25, (57, 92, 154)),
    (0.50, (116, 170, 170)),
    (0.75, (222, 196, 124)),
    (1.00, (250, 240, 210)),
)


def _fmt(v: float) -> str:
    if not math.isfinite(v):
        return "0"
    out = format(float(v), ".6g")
    return "0" if out in ("-0", "-0.0") else out


def _esc(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def _heat_color(t: float) -> str:
    t = min(1.0, max(0.0, t))
    for (p0, c0), (p1, c1) in zip(HEAT_STOPS, HEAT_STOPS[1:]):
        if t <= p1:
            w = 0.0 if p1 == p0 else (t - p0) / (p1 - p0)
            r, g, b = (round(a + w * (b_ - a)) for a, b_ in zip(c0, c1))
            return f"#{r:02x}{g:02x}{b:02x}"
    r, g, b = HEAT_STOPS[-1][1]
    return f"#{r:02x}{g:02x}{b:02x}"


def _open_svg(width: int, height: int, title: str) -> list:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width // 2}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{_esc(title)}</text>')
    return parts


class _Frame:
    """Maps data coordinates into the plotting rectangle (SVG y points down)."""

    def __init__(self, x_lo, x_hi, y_lo, y_hi, width, height):
        pad_x = 0.0 if x_hi > x_lo else 0.5
        pad_y = 0.0 if y_hi > y_lo else 0.5
        self.x_lo, self.x_hi = x_lo - pad_x, x_hi + pad_x
        self.y_lo, self.y_hi = y_lo - pad_y, y_hi + pad_y
        self.left, self.top = MARGIN, MARGIN // 2 + 14
        self.right, self.bottom = width - MARGIN // 3, height - MARGIN // 2 - 8

    def x(self, v: float) -> float:
        t = (v - self.x_lo) / (self.x_hi - self.x_lo)
        return self.left + t * (self.right - self.left)

    def y(self, v: float) -> float:
        t = (v - self.y_lo) / (self.y_hi - self.y_lo)
        return self.bottom - t * (self.bottom - self.top)


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / (n - 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw)
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-12 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out or [lo]


def _axes(parts: list, fr: _Frame, xlabel: str, ylabel: str) -> None:
    parts.append(
        f'<rect x="{_fmt(fr.left)}" y="{_fmt(fr.top)}" '
        f'width="{_fmt(fr.right - fr.left)}" height="{_fmt(fr.bottom - fr.top)}" '
        f'fill="none" stroke="#333333"/>')
    for v in _ticks(fr.x_lo, fr.x_hi):
        px = fr.x(v)
        parts.append(f'<line x1="{_fmt(px)}" y1="{_fmt(fr.bottom)}" '
                     f'x2="{_fmt(px)}" y2="{_fmt(fr.bottom + 4)}" stroke="#333333"/>')
        parts.append(f'<text x="{_fmt(px)}" y="{_fmt(fr.bottom + 16)}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="10">{_fmt(v)}</text>')
    for v in _ticks(fr.y_lo, fr.y_hi):
        py = fr.y(v)
        parts.append(f'<line x1="{_fmt(fr.left - 4)}" y1="{_fmt(py)}" '
                     f'x2="{_fmt(fr.left)}" y2="{_fmt(py)}" stroke="#333333"/>')
        parts.append(f'<text x="{_fmt(fr.left - 6)}" y="{_fmt(py + 3)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="10">{_fmt(v)}</text>')
    if xlabel:
        parts.append(f'<text x="{_fmt((fr.left + fr.right) / 2)}" '
                     f'y="{_fmt(fr.bottom + 32)}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{_esc(xlabel)}</text>')
    if ylabel:
        parts.append(f'<text x="14" y="{_fmt((fr.top + fr.bottom) / 2)}" '
                     f'text-anchor="middle" font-family="sans-serif" font-size="11" '
                     f'transform="rotate(-90 14 {_fmt((fr.top + fr.bottom) / 2)})">'
                     f'{_esc(ylabel)}</text>')


def heatmap_svg(values: np.ndarray, extent, path: str,
                mask: Optional[np.ndarray] = None, title: str = "",
                max_cells: int = 200) -> None:
    """Per-cell rectangle heatmap of a (rows, cols) array.

    ``extent`` is (x_lo, x_hi, y_lo, y_hi) with row index increasing along
    +y.  Large arrays are strided down to at most ``max_cells`` per axis.
    """
    values = np.asarray(values, dtype=float)
    rows, cols = values.shape
    stride = max(1, math.ceil(max(rows, cols) / max_cells))
    values = values[::stride, ::stride]
    keep = None if mask is None else np.asarray(mask, bool)[::stride, ::stride]
    rows, cols = values.shape
    x_lo, x_hi, y_lo, y_hi = (float(e) for e in extent)

    shown = values if keep is None else values[keep]
    finite = shown[np.isfinite(shown)]
    v_lo = float(finite.min()) if finite.size else 0.0
    v_hi = float(finite.max()) if finite.size else 1.0
    span = v_hi - v_lo if v_hi > v_lo else 1.0

    width = height = CANVAS
    fr = _Frame(x_lo, x_hi, y_lo, y_hi, width, height)
    parts = _open_svg(width, height, title)
    cell_w = (fr.x(x_hi) - fr.x(x_lo)) / cols
    cell_h = (fr.y(y_lo) - fr.y(y_hi)) / rows
    for i in range(rows):
        for j in range(cols):
            if keep is not None and not keep[i, j]:
                continue
            v = values[i, j]
            if not math.isfinite(v):
                continue
            color = _heat_color((v - v_lo) / span)
            px = fr.left + j * cell_w
            py = fr.bottom - (i + 1) * cell_h
            parts.append(f'<rect x="{_fmt(px)}" y="{_fmt(py)}" '
                         f'width="{_fmt(cell_w + 0.5)}" height="{_fmt(cell_h + 0.5)}" '
                         f'fill="{color}"/>')
    _axes(parts, fr, "x", "y")
    parts.append(f'<text x="{_fmt(fr.right)}" y="{_fmt(fr.top - 4)}" '
                 f'text-anchor="end" font-family="sans-serif" font-size="10">'
                 f'range [{_fmt(v_lo)}, {_fmt(v_hi)}]</text>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")


def curves_svg(series: Sequence[tuple], path: str, title: str = "",
               xlabel: str = "", ylabel: str = "",
               hlines: Sequence[tuple] = ()) -> None:
    """Line plot of (xs, ys, label) series with optional labeled h-lines."""
    xs_all = np.concatenate([np.asarray(s[0], float) for s in series])
    ys_all = np.concatenate([np.asarray(s[1], float) for s in series])
    ys_all = np.concatenate([ys_all, np.array([v for v, _ in hlines], float)])
    width, height = CANVAS, CANVAS * 3 // 4
    fr = _Frame(float(xs_all.min()), float(xs_all.max()),
                float(ys_all.min()), float(ys_all.max()), width, height)
    parts = _open_svg(width, height, title)
    for value, label in hlines:
        py = fr.y(value)
        parts.append(f'<line x1="{_fmt(fr.left)}" y1="{_fmt(py)}" '
                     f'x2="{_fmt(fr.right)}" y2="{_fmt(py)}" stroke="#888888" '
                     f'stroke-dasharray="5,4"/>')
        if label:
            parts.append(f'<text x="{_fmt(fr.left + 4)}" y="{_fmt(py - 4)}" '
                         f'font-family="sans-serif" font-size="10" '
                         f'fill="#555555">{_esc(label)}</text>')
    for k, (xs, ys, label) in enumerate(series):
        color = SERIES_COLORS[k % len(SERIES_COLORS)]
        pts = " ".join(f"{_fmt(fr.x(float(x)))},{_fmt(fr.y(float(y)))}"
                       for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        if label:
            ly = fr.top + 14 + 14 * k
            parts.append(f'<line x1="{_fmt(fr.right - 70)}" y1="{_fmt(ly - 4)}" '
                         f'x2="{_fmt(fr.right - 50)}" y2="{_fmt(ly - 4)}" '
                         f'stroke="{color}" stroke-width="1.5"/>')
            parts.append(f'<text x="{_fmt(fr.right - 46)}" y="{_fmt(ly)}" '
                         f'font-family="sans-serif" font-size="10">'
                         f'{_esc(label)}</text>')
    _axes(parts, fr, xlabel, ylabel)
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")


def segments_svg(segments: Sequence[tuple], extent, path: str,
                 points: Sequence[tuple] = (), title: str = "") -> None:
    """Line-segment overlay (e.g. a traced contour) with optional markers."""
    x_lo, x_hi, y_lo, y_hi = (float(e) for e in extent)
    width = height = CANVAS
    fr = _Frame(x_lo, x_hi, y_lo, y_hi, width, height)
    parts = _open_svg(width, height, title)
    for (a, b) in segments:
        parts.append(f'<line x1="{_fmt(fr.x(a[0]))}" y1="{_fmt(fr.y(a[1]))}" '
                     f'x2="{_fmt(fr.x(b[0]))}" y2="{_fmt(fr.y(b[1]))}" '
                     f'stroke="{SERIES_COLORS[0]}" stroke-width="1.2"/>')
    for (x, y) in points:
        parts.append(f'<circle cx="{_fmt(fr.x(x))}" cy="{_fmt(fr.y(y))}" '
                     f'r="2.5" fill="{SERIES_COLORS[1]}"/>')
    _axes(parts, fr, "x", "y")
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")
