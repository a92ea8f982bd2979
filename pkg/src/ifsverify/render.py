"""Deterministic SVG scatter plots of labelled point clouds."""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .geometry import PointCloud

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
)
SINGLE = "#202020"


@dataclass(frozen=True)
class Style:
    width: int = 800
    height: int = 800
    margin: int = 40
    legend_width: int = 160
    point_radius: float = 0.8
    max_legend: int = 20
    title: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "Style":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        s = cls(**known)
        if s.width <= 2 * s.margin or s.height <= 2 * s.margin or s.point_radius <= 0:
            raise ValueError("style leaves no room to draw")
        return s


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _label_order(labels) -> list[str]:
    """Distinct labels sorted with numeric suffixes in numeric order (O_2 before O_10)."""

    def key(s: str):
        head, _, tail = s.rpartition("_")
        return (head, int(tail), "") if tail.isdigit() and head else (s, -1, s)

    return sorted(set(labels), key=key)


def render_svg(cloud: PointCloud, style: Style | None = None) -> str:
    style = style or Style()
    pts = cloud.points
    labels = cloud.labels if cloud.labels is not None else ("",) * len(pts)
    names = _label_order(labels)
    single = names == [""] or len(names) == 0
    colour = {n: (SINGLE if single else PALETTE[i % len(PALETTE)]) for i, n in enumerate(names)}

    lo = pts.min(axis=0) if len(pts) else np.zeros(2)
    hi = pts.max(axis=0) if len(pts) else np.ones(2)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-12))
    legend = 0 if single else style.legend_width
    box = min(style.width - 2 * style.margin - legend, style.height - 2 * style.margin)
    scale = box / span

    def sx(x):
        return style.margin + (x - lo[0]) * scale

    def sy(y):
        return style.height - style.margin - (y - lo[1]) * scale

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{style.width}" height="{style.height}" '
        f'viewBox="0 0 {style.width} {style.height}">',
        f'<rect x="0" y="0" width="{style.width}" height="{style.height}" fill="white"/>',
    ]
    if style.title:
        out.append(f'<text x="{style.margin}" y="{style.margin / 2:.0f}" font-size="14" font-family="sans-serif">{escape(style.title)}</text>')
    x0, y0 = sx(lo[0]), sy(lo[1])
    out.append(
        f'<rect class="axes" x="{_fmt(x0)}" y="{_fmt(y0 - box)}" width="{_fmt(box)}" height="{_fmt(box)}" '
        'fill="none" stroke="#444" stroke-width="1"/>'
    )
    for v, anchor, x, y in (
        (lo[0], "start", x0, y0 + 16),
        (lo[0] + span, "end", x0 + box, y0 + 16),
        (lo[1], "end", x0 - 4, y0),
        (lo[1] + span, "end", x0 - 4, y0 - box + 10),
    ):
        out.append(f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="10" font-family="sans-serif" text-anchor="{anchor}">{v:.3g}</text>')

    lab = np.asarray(labels, dtype=object)
    r = _fmt(style.point_radius)
    for n in names:
        sel = pts[lab == n]
        out.append(f'<g fill="{colour[n]}" data-label="{escape(n)}">')
        out.extend(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="{r}"/>' for x, y in sel)
        out.append("</g>")

    if not single:
        lx = style.width - style.margin - style.legend_width + 16
        ly = style.margin
        out.append('<g class="legend" font-size="11" font-family="sans-serif">')
        shown = names[: style.max_legend]
        for i, n in enumerate(shown):
            y = ly + 16 * i
            out.append(f'<rect x="{lx}" y="{y}" width="10" height="10" fill="{colour[n]}"/>')
            out.append(f'<text x="{lx + 16}" y="{y + 9}">{escape(n)}</text>')
        if len(names) > len(shown):
            out.append(f'<text x="{lx}" y="{ly + 16 * len(shown) + 9}">+{len(names) - len(shown)} more labels</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
