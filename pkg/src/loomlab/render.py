"""Deterministic SVG figures of the band model.

The figure shows the band strip, the core line, the excised half-planes
(shaded regions above their boundary geodesics) and any number of traced
paths drawn as polylines colored by sheet.  Output is plain SVG text with
all numbers printed at 9 significant digits, so a fixed input yields a
byte-identical file.
"""

from __future__ import annotations

import math

from .hyperbolic import chart_to_band_xy
from .surface import LoomSurfaceSpec, boundary_geodesics

SHEET_COLORS = ("#1f6fb4", "#c23b3b")  # sheet 0 blue, sheet 1 red
BAND_FILL = "#fdfdfd"
HALF_PLANE_FILL = "#c8c8c8"
CORE_COLOR = "#444444"

_HALF_PI = math.pi / 2


def _fmt(x: float) -> str:
    out = f"{x:.9g}"
    return "0" if out == "-0" else out


class _Canvas:
    def __init__(self, x_lo, x_hi, px_per_unit=60.0, pad=0.4):
        self.x_lo = x_lo - pad
        self.x_hi = x_hi + pad
        self.scale = px_per_unit
        self.height = (math.pi + 2 * pad) * px_per_unit
        self.width = (self.x_hi - self.x_lo) * px_per_unit
        self.pad = pad

    def to_px(self, x: float, y: float) -> tuple[float, float]:
        return (
            (x - self.x_lo) * self.scale,
            (_HALF_PI + self.pad - y) * self.scale,
        )

    def path(self, pts) -> str:
        return " ".join(
            f"{'M' if i == 0 else 'L'}{_fmt(px)},{_fmt(py)}"
            for i, (px, py) in enumerate(pts)
        )


def _boundary_band_points(line, x_lo, x_hi, n=160):
    """Band-coordinate points of a chart boundary geodesic, clipped to a
    horizontal range."""
    c, r = line.center_radius()
    pts = []
    for i in range(1, n):
        theta = math.pi * i / n
        w = complex(c + r * math.cos(theta), r * math.sin(theta))
        x, y = chart_to_band_xy(w.real, w.imag)
        if x_lo - 1.0 <= x <= x_hi + 1.0:
            pts.append((x, min(y, _HALF_PI - 1e-3)))
    pts.sort(key=lambda p: p[0])
    return pts


def render_svg(spec: LoomSurfaceSpec, trajectories, path: str, *,
               x_range: tuple[float, float] | None = None,
               px_per_unit: float = 60.0) -> None:
    """Write the band figure: strip, half-planes, core line, trajectories.

    `trajectories` is a list of row lists as produced by a trajectory dump:
    (time, sheet, band_x, band_y, tau, crossing_index).
    """
    xs = [e.s for e in spec.entries]
    for rows in trajectories:
        xs.extend(row[2] for row in rows)
    if x_range is None:
        x_range = (min(xs) - 2.0, max(xs) + 2.0)
    cv = _Canvas(x_range[0], x_range[1], px_per_unit)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(cv.width)}" '
        f'height="{_fmt(cv.height)}" viewBox="0 0 {_fmt(cv.width)} {_fmt(cv.height)}">'
    ]
    x0px, y_top = cv.to_px(cv.x_lo, _HALF_PI)
    x1px, y_bot = cv.to_px(cv.x_hi, -_HALF_PI)
    parts.append(
        f'<rect x="{_fmt(x0px)}" y="{_fmt(y_top)}" width="{_fmt(x1px - x0px)}" '
        f'height="{_fmt(y_bot - y_top)}" fill="{BAND_FILL}" stroke="#888" stroke-width="1"/>'
    )

    for line in boundary_geodesics(spec):
        band_pts = _boundary_band_points(line, *x_range)
        if len(band_pts) < 2:
            continue
        px_pts = [cv.to_px(x, y) for x, y in band_pts]
        first = cv.to_px(band_pts[0][0], _HALF_PI)
        last = cv.to_px(band_pts[-1][0], _HALF_PI)
        d = cv.path([first, *px_pts, last]) + " Z"
        parts.append(f'<path d="{d}" fill="{HALF_PLANE_FILL}" stroke="#777" stroke-width="1"/>')

    lx0 = cv.to_px(cv.x_lo, 0.0)
    lx1 = cv.to_px(cv.x_hi, 0.0)
    parts.append(
        f'<line x1="{_fmt(lx0[0])}" y1="{_fmt(lx0[1])}" x2="{_fmt(lx1[0])}" '
        f'y2="{_fmt(lx1[1])}" stroke="{CORE_COLOR}" stroke-width="1" stroke-dasharray="6,4"/>'
    )

    for rows in trajectories:
        # split into per-sheet runs so the color changes at each crossing
        run: list[tuple[float, float]] = []
        run_sheet = None
        pieces = []
        for time, sheet, x, y, tau_v, idx in rows:
            if run_sheet is None:
                run_sheet = sheet
            if sheet != run_sheet:
                pieces.append((run_sheet, run))
                run = [run[-1]] if run else []
                run_sheet = sheet
            run.append((x, y))
        if run:
            pieces.append((run_sheet, run))
        for sheet, pts in pieces:
            if len(pts) < 2:
                continue
            px_pts = [cv.to_px(x, y) for x, y in pts]
            parts.append(
                f'<path d="{cv.path(px_pts)}" fill="none" '
                f'stroke="{SHEET_COLORS[sheet % 2]}" stroke-width="1.5"/>'
            )
        for time, sheet, x, y, tau_v, idx in rows:
            if idx is not None:
                px, py = cv.to_px(x, y)
                parts.append(
                    f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" fill="#222"/>'
                )

    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
