"""Dependency-free SVG charts with byte-reproducible output.

Every coordinate is formatted with a fixed %.6g rule and nothing
time-dependent (timestamps, random ids) is ever emitted, so rendering the
same data twice yields identical bytes.  Charts render in a fixed light
palette independent of any viewer theme.
"""

from __future__ import annotations

import numpy as np

from .exceptions import SchemaError

__all__ = [
    "SvgCanvas",
    "histogram_chart",
    "line_chart",
    "hinge_chart",
    "field_chart",
]

PALETTE = ("#1f6feb", "#d1242f", "#2da44e", "#9a6700", "#8250df", "#57606a")

_W, _H = 640, 440
_ML, _MR, _MT, _MB = 64, 20, 36, 48


def _f(v: float) -> str:
    s = f"{float(v):.6g}"
    return "0" if s == "-0" else s


class SvgCanvas:
    """Data-space drawing surface over a fixed pixel frame."""

    def __init__(self, x_range, y_range, title: str = "",
                 x_label: str = "", y_label: str = ""):
        x0, x1 = float(x_range[0]), float(x_range[1])
        y0, y1 = float(y_range[0]), float(y_range[1])
        if x0 == x1:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y0 == y1:
            y0, y1 = y0 - 0.5, y1 + 0.5
        if x0 > x1 or y0 > y1:
            raise SchemaError("ranges must be ordered")
        pad_x = 0.04 * (x1 - x0)
        pad_y = 0.06 * (y1 - y0)
        self.x0, self.x1 = x0 - pad_x, x1 + pad_x
        self.y0, self.y1 = y0 - pad_y, y1 + pad_y
        self.title = title
        self.x_label = x_label
        self.y_label = y_label
        self.elements: list[str] = []

    def px(self, x: float) -> float:
        frac = (x - self.x0) / (self.x1 - self.x0)
        return _ML + frac * (_W - _ML - _MR)

    def py(self, y: float) -> float:
        frac = (y - self.y0) / (self.y1 - self.y0)
        return _H - _MB - frac * (_H - _MT - _MB)

    def add(self, element: str) -> None:
        self.elements.append(element)

    def line(self, x_a, y_a, x_b, y_b, color: str, width: float = 1.5,
             opacity: float = 1.0) -> None:
        op = "" if opacity >= 1.0 else f' stroke-opacity="{_f(opacity)}"'
        self.add(f'<line x1="{_f(self.px(x_a))}" y1="{_f(self.py(y_a))}" '
                 f'x2="{_f(self.px(x_b))}" y2="{_f(self.py(y_b))}" '
                 f'stroke="{color}" stroke-width="{_f(width)}"{op}/>')

    def polyline(self, xs, ys, color: str, width: float = 1.5) -> None:
        pts = " ".join(f"{_f(self.px(x))},{_f(self.py(y))}"
                       for x, y in zip(xs, ys))
        self.add(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                 f'stroke-width="{_f(width)}"/>')

    def circle(self, x, y, radius: float, color: str,
               opacity: float = 1.0) -> None:
        op = "" if opacity >= 1.0 else f' fill-opacity="{_f(opacity)}"'
        self.add(f'<circle cx="{_f(self.px(x))}" cy="{_f(self.py(y))}" '
                 f'r="{_f(radius)}" fill="{color}"{op}/>')

    def bar(self, x_a, x_b, y_top, color: str) -> None:
        left = self.px(x_a)
        top = self.py(y_top)
        base = self.py(max(0.0, self.y0))
        self.add(f'<rect x="{_f(left)}" y="{_f(top)}" '
                 f'width="{_f(self.px(x_b) - left)}" '
                 f'height="{_f(max(base - top, 0.0))}" fill="{color}" '
                 f'stroke="#ffffff" stroke-width="0.5"/>')

    def text(self, px_x: float, px_y: float, content: str, size: int = 12,
             anchor: str = "middle", color: str = "#24292f",
             rotate: bool = False) -> None:
        content = (content.replace("&", "&amp;").replace("<", "&lt;")
                   .replace(">", "&gt;"))
        transform = (f' transform="rotate(-90 {_f(px_x)} {_f(px_y)})"'
                     if rotate else "")
        self.add(f'<text x="{_f(px_x)}" y="{_f(px_y)}" font-size="{size}" '
                 f'font-family="sans-serif" text-anchor="{anchor}" '
                 f'fill="{color}"{transform}>{content}</text>')

    def _axes(self) -> list[str]:
        out = [f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="#ffffff"/>',
               f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
               f'height="{_H - _MT - _MB}" fill="none" stroke="#d0d7de"/>']
        for tick in np.linspace(self.x0, self.x1, 5):
            x = self.px(tick)
            out.append(f'<line x1="{_f(x)}" y1="{_H - _MB}" x2="{_f(x)}" '
                       f'y2="{_H - _MB + 4}" stroke="#57606a"/>')
            out.append(f'<text x="{_f(x)}" y="{_H - _MB + 17}" font-size="11" '
                       f'font-family="sans-serif" text-anchor="middle" '
                       f'fill="#57606a">{_f(round(tick, 9))}</text>')
        for tick in np.linspace(self.y0, self.y1, 5):
            y = self.py(tick)
            out.append(f'<line x1="{_ML - 4}" y1="{_f(y)}" x2="{_ML}" '
                       f'y2="{_f(y)}" stroke="#57606a"/>')
            out.append(f'<text x="{_ML - 7}" y="{_f(y + 4)}" font-size="11" '
                       f'font-family="sans-serif" text-anchor="end" '
                       f'fill="#57606a">{_f(round(tick, 9))}</text>')
        if self.title:
            out.append(f'<text x="{_W // 2}" y="22" font-size="14" '
                       f'font-family="sans-serif" text-anchor="middle" '
                       f'fill="#24292f">{self.title}</text>')
        if self.x_label:
            out.append(f'<text x="{_W // 2}" y="{_H - 10}" font-size="12" '
                       f'font-family="sans-serif" text-anchor="middle" '
                       f'fill="#24292f">{self.x_label}</text>')
        if self.y_label:
            out.append(f'<text x="16" y="{_H // 2}" font-size="12" '
                       f'font-family="sans-serif" text-anchor="middle" '
                       f'fill="#24292f" transform="rotate(-90 16 '
                       f'{_H // 2})">{self.y_label}</text>')
        return out

    def legend(self, labels_colors) -> None:
        x = _W - _MR - 8
        y = _MT + 16
        for label, color in labels_colors:
            self.add(f'<rect x="{x - 120}" y="{y - 9}" width="12" height="4" '
                     f'fill="{color}"/>')
            self.text(x - 104, y - 4, label, size=11, anchor="start")
            y += 16

    def render(self) -> str:
        body = "\n".join(self._axes() + self.elements)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
                f'height="{_H}" viewBox="0 0 {_W} {_H}">\n{body}\n</svg>\n')


def histogram_chart(edges, counts, title: str = "",
                    x_label: str = "value", y_label: str = "count") -> str:
    edges = np.asarray(edges, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if edges.size != counts.size + 1:
        raise SchemaError("need one more edge than counts")
    top = counts.max() if counts.size else 1.0
    canvas = SvgCanvas((edges[0], edges[-1]), (0.0, max(top, 1.0)),
                       title, x_label, y_label)
    for i in range(counts.size):
        canvas.bar(edges[i], edges[i + 1], counts[i], PALETTE[0])
    return canvas.render()


def line_chart(lines, title: str = "", x_label: str = "",
               y_label: str = "") -> str:
    """lines: iterable of (label, xs, ys)."""
    series = [(str(label), np.asarray(xs, float), np.asarray(ys, float))
              for label, xs, ys in lines]
    if not series or any(x.size == 0 for _, x, _ in series):
        raise SchemaError("line chart needs non-empty series")
    all_x = np.concatenate([x for _, x, _ in series])
    all_y = np.concatenate([y for _, _, y in series])
    canvas = SvgCanvas((all_x.min(), all_x.max()), (all_y.min(), all_y.max()),
                       title, x_label, y_label)
    entries = []
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        canvas.polyline(xs, ys, color)
        if label:
            entries.append((label, color))
    if len(entries) > 1:
        canvas.legend(entries)
    return canvas.render()


def hinge_chart(points, curve, fit, title: str = "",
                x_label: str = "pc1", y_label: str = "pc2") -> str:
    """Scatter of (x, y) points, windowed means with 2 SE whiskers, and the
    fitted saw-tooth overlay."""
    pts = np.asarray(points, dtype=float)
    x_lo = min(pts[:, 0].min(), curve.centers.min())
    x_hi = max(pts[:, 0].max(), curve.centers.max())
    y_lo = min(pts[:, 1].min(), (curve.means - 2 * curve.standard_errors).min())
    y_hi = max(pts[:, 1].max(), (curve.means + 2 * curve.standard_errors).max())
    canvas = SvgCanvas((x_lo, x_hi), (y_lo, y_hi), title, x_label, y_label)
    for x, y in pts:
        canvas.circle(x, y, 1.6, "#57606a", opacity=0.35)
    for c, m, s in zip(curve.centers, curve.means, curve.standard_errors):
        canvas.line(c, m - 2 * s, c, m + 2 * s, PALETTE[2], width=1.0)
        canvas.circle(c, m, 2.4, PALETTE[2])
    grid = np.linspace(x_lo, x_hi, 200)
    canvas.polyline(grid, fit.predict(grid), PALETTE[1], width=2.0)
    for b in fit.breakpoints:
        canvas.line(b, y_lo, b, y_hi, PALETTE[1], width=1.0, opacity=0.5)
    canvas.legend([("window mean", PALETTE[2]), ("fit", PALETTE[1])])
    return canvas.render()


def field_chart(field, title: str = "", x_label: str = "x",
                y_label: str = "y") -> str:
    """Arrow per supported node, scaled so the longest drift arrow spans
    about one grid cell; unsupported nodes drawn as hollow markers."""
    grid = field.grid
    canvas = SvgCanvas((grid.x_min, grid.x_max), (grid.y_min, grid.y_max),
                       title, x_label, y_label)
    hx, hy = grid.spacing
    speed = np.hypot(field.drift[:, :, 0], field.drift[:, :, 1])
    vmax = np.nanmax(speed) if np.isfinite(speed).any() else 0.0
    scale = 0.9 * min(hx, hy) / vmax if vmax > 0 else 0.0
    xs, ys = grid.xs, grid.ys
    for iy in range(grid.ny):
        for ix in range(grid.nx):
            x, y = xs[ix], ys[iy]
            if not field.supported[iy, ix]:
                canvas.add(f'<circle cx="{_f(canvas.px(x))}" '
                           f'cy="{_f(canvas.py(y))}" r="1.5" fill="none" '
                           f'stroke="#d0d7de"/>')
                continue
            dx = field.drift[iy, ix, 0] * scale
            dy = field.drift[iy, ix, 1] * scale
            canvas.line(x, y, x + dx, y + dy, PALETTE[0], width=1.0)
            canvas.circle(x + dx, y + dy, 1.4, PALETTE[0])
    return canvas.render()
