"""Minimal self-contained SVG line plots.

The harness writes result figures without a plotting dependency: each figure
is one polyline per series, an optional shaded band per series, linear axes
with round-number ticks, and a legend.  Output is a complete standalone SVG
document with no external references.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PALETTE = (
    "#1f6fb2",
    "#d1495b",
    "#3b8c5a",
    "#8e6bb2",
    "#c98a1c",
    "#4aa3a2",
    "#7d5a50",
    "#5b5b5b",
)

WIDTH, HEIGHT = 760, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 16, 40, 48


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    band: np.ndarray | None = None  # half-width around y, same length

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("series x and y must be equal-length vectors")
        if self.band is not None:
            self.band = np.asarray(self.band, dtype=float)
            if self.band.shape != self.y.shape:
                raise ValueError("band must match series length")


@dataclass
class Figure:
    title: str
    xlabel: str
    ylabel: str
    series: list[Series] = field(default_factory=list)


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1, 2, 2.5, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = np.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(float(v))
        v += step
    return ticks


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e5 or abs(v) < 1e-3:
        return f"{v:.1e}"
    out = f"{v:.6g}"
    return out


def render(fig: Figure) -> str:
    xs = np.concatenate([s.x for s in fig.series]) if fig.series else np.array([0.0, 1.0])
    ys_all = []
    for s in fig.series:
        ys_all.append(s.y)
        if s.band is not None:
            ys_all.append(s.y + s.band)
            ys_all.append(s.y - s.band)
    ys = np.concatenate(ys_all) if ys_all else np.array([0.0, 1.0])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad = 0.04 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(v: np.ndarray) -> np.ndarray:
        return MARGIN_L + (np.asarray(v) - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: np.ndarray) -> np.ndarray:
        return MARGIN_T + plot_h - (np.asarray(v) - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="16">{fig.title}</text>',
    ]
    # axes + ticks
    x0, y0 = MARGIN_L, MARGIN_T + plot_h
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>'
    )
    parts.append(f'<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{y0}" stroke="black"/>')
    for tv in _ticks(x_lo, x_hi):
        px = float(sx(tv))
        parts.append(f'<line x1="{px}" y1="{y0}" x2="{px}" y2="{y0 + 5}" stroke="black"/>')
        parts.append(
            f'<text x="{px}" y="{y0 + 20}" text-anchor="middle" font-size="11">{_fmt(tv)}</text>'
        )
    for tv in _ticks(y_lo, y_hi):
        py = float(sy(tv))
        parts.append(f'<line x1="{x0 - 5}" y1="{py}" x2="{x0}" y2="{py}" stroke="black"/>')
        parts.append(
            f'<text x="{x0 - 8}" y="{py + 4}" text-anchor="end" font-size="11">{_fmt(tv)}</text>'
        )
    parts.append(
        f'<text x="{x0 + plot_w / 2}" y="{HEIGHT - 10}" text-anchor="middle" font-size="13">{fig.xlabel}</text>'
    )
    parts.append(
        f'<text x="18" y="{MARGIN_T + plot_h / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {MARGIN_T + plot_h / 2})">{fig.ylabel}</text>'
    )
    # series
    for i, s in enumerate(fig.series):
        color = PALETTE[i % len(PALETTE)]
        px, py = sx(s.x), sy(s.y)
        if s.band is not None:
            upper = sy(s.y + s.band)
            lower = sy(s.y - s.band)
            ring = list(zip(px, upper)) + list(zip(px[::-1], lower[::-1]))
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in ring)
            parts.append(f'<polygon points="{pts}" fill="{color}" opacity="0.15"/>')
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.8"/>'
        )
    # legend
    ly = MARGIN_T + 8
    for i, s in enumerate(fig.series):
        color = PALETTE[i % len(PALETTE)]
        parts.append(
            f'<line x1="{x0 + 12}" y1="{ly}" x2="{x0 + 40}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2.5"/>'
        )
        parts.append(
            f'<text x="{x0 + 46}" y="{ly + 4}" font-size="12">{s.label}</text>'
        )
        ly += 18
    parts.append("</svg>")
    return "\n".join(parts)
