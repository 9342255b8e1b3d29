"""Minimal static SVG plots: bar charts, scatter panels and line plots."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["bar_chart", "scatter_panels", "line_plot"]

WIDTH, HEIGHT = 640, 400
MARGIN = (60, 20, 40, 50)  # left, right, top, bottom
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v):
    if v == 0 or not math.isfinite(v):
        return "0"
    if 1e-3 <= abs(v) < 1e5:
        return f"{v:.4g}"
    return f"{v:.2e}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


class _Canvas:
    def __init__(self, width=WIDTH, height=HEIGHT):
        self.w, self.h = width, height
        self.parts = []

    def text(self, x, y, s, size=12, anchor="middle", rotate=None):
        tr = f' transform="rotate({rotate} {x:.1f} {y:.1f})"' if rotate else ""
        self.parts.append(f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" '
                          f'text-anchor="{anchor}" font-family="sans-serif"{tr}>{escape(str(s))}</text>')

    def line(self, x1, y1, x2, y2, color="#000", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" '
                          f'stroke="{color}" stroke-width="{width}"{d}/>')

    def rect(self, x, y, w, h, color):
        self.parts.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{w:.1f}" height="{h:.1f}" fill="{color}"/>')

    def circle(self, x, y, r, color):
        self.parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="{r}" fill="{color}" fill-opacity="0.5"/>')

    def polyline(self, xs, ys, color):
        pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(xs, ys))
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')

    def render(self):
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" height="{self.h}" '
                f'viewBox="0 0 {self.w} {self.h}">')
        body = f'<rect width="{self.w}" height="{self.h}" fill="#fff"/>'
        return "\n".join([head, body, *self.parts, "</svg>"]) + "\n"


class _Axes:
    """Linear map from data coordinates into a pixel box."""

    def __init__(self, canvas, box, xlim, ylim):
        self.c = canvas
        self.x0, self.y0, self.x1, self.y1 = box
        self.xlim, self.ylim = xlim, ylim

    def px(self, x):
        lo, hi = self.xlim
        return self.x0 + (x - lo) / (hi - lo or 1.0) * (self.x1 - self.x0)

    def py(self, y):
        lo, hi = self.ylim
        return self.y1 - (y - lo) / (hi - lo or 1.0) * (self.y1 - self.y0)

    def frame(self, xticks=True, yticks=True, size=10):
        c = self.c
        c.line(self.x0, self.y1, self.x1, self.y1)
        c.line(self.x0, self.y0, self.x0, self.y1)
        if yticks:
            for v in _ticks(*self.ylim):
                y = self.py(v)
                c.line(self.x0 - 4, y, self.x0, y)
                c.text(self.x0 - 6, y + 4, _fmt(v), size=size, anchor="end")
        if xticks:
            for v in _ticks(*self.xlim):
                x = self.px(v)
                c.line(x, self.y1, x, self.y1 + 4)
                c.text(x, self.y1 + 16, _fmt(v), size=size)


def _limits(values, pad=0.05):
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if v.size == 0:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


def bar_chart(labels, values, title="", ylabel="", ylim=(-1.0, 1.0)):
    """Vertical bars, one per label; NaN values are drawn as empty slots."""
    c = _Canvas()
    left, right, top, bottom = MARGIN
    ax = _Axes(c, (left, top, c.w - right, c.h - bottom), (0, max(len(labels), 1)), ylim)
    ax.frame(xticks=False)
    zero = ax.py(0.0) if ylim[0] <= 0 <= ylim[1] else ax.y1
    c.line(ax.x0, zero, ax.x1, zero, color="#888")
    slot = (ax.x1 - ax.x0) / max(len(labels), 1)
    for k, (lab, v) in enumerate(zip(labels, values)):
        x = ax.x0 + k * slot
        if np.isfinite(v):
            y = ax.py(float(np.clip(v, *ylim)))
            c.rect(x + 0.15 * slot, min(y, zero), 0.7 * slot, abs(zero - y),
                   PALETTE[0] if v >= 0 else PALETTE[1])
        c.text(x + 0.5 * slot, ax.y1 + 16, lab, size=11)
    c.text(c.w / 2, 22, title, size=14)
    c.text(16, (ax.y0 + ax.y1) / 2, ylabel, rotate=-90)
    return c.render()


def scatter_panels(panels, title="", xlabel="", ylabel="", columns=3):
    """Grid of small scatter plots; ``panels`` maps a panel title to ``(x, y)``."""
    names = list(panels)
    rows = max(1, math.ceil(len(names) / columns))
    pw, ph = 220, 180
    c = _Canvas(columns * pw + 20, rows * ph + 50)
    c.text(c.w / 2, 22, title, size=14)
    for k, name in enumerate(names):
        x, y = (np.asarray(a, dtype=float) for a in panels[name])
        r, q = divmod(k, columns)
        ox, oy = 10 + q * pw, 40 + r * ph
        ax = _Axes(c, (ox + 45, oy + 20, ox + pw - 10, oy + ph - 35), _limits(x), _limits(y))
        ax.frame(size=8)
        for xi, yi in zip(x, y):
            if np.isfinite(xi) and np.isfinite(yi):
                c.circle(ax.px(xi), ax.py(yi), 1.5, PALETTE[0])
        c.text((ax.x0 + ax.x1) / 2, oy + 14, name, size=11)
        c.text((ax.x0 + ax.x1) / 2, oy + ph - 8, xlabel, size=9)
    if ylabel:
        c.text(8, c.h / 2, ylabel, size=9, rotate=-90)
    return c.render()


def line_plot(x, series, title="", xlabel="", ylabel="", markers=True):
    """One polyline per entry of ``series`` (label to y values) over shared ``x``."""
    x = np.asarray(x, dtype=float)
    c = _Canvas()
    left, right, top, bottom = MARGIN
    ally = np.concatenate([np.asarray(v, dtype=float) for v in series.values()]) if series else np.array([])
    ax = _Axes(c, (left, top, c.w - right - 90, c.h - bottom), _limits(x, 0.0), _limits(ally))
    ax.frame()
    for k, (label, y) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(y)
        c.polyline([ax.px(v) for v in x[ok]], [ax.py(v) for v in y[ok]], color)
        if markers:
            for xi, yi in zip(x[ok], y[ok]):
                c.circle(ax.px(xi), ax.py(yi), 3, color)
        ly = ax.y0 + 16 * k
        c.line(ax.x1 + 10, ly, ax.x1 + 30, ly, color=color, width=2)
        c.text(ax.x1 + 34, ly + 4, label, size=11, anchor="start")
    c.text(c.w / 2, 22, title, size=14)
    c.text((ax.x0 + ax.x1) / 2, c.h - 10, xlabel)
    c.text(16, (ax.y0 + ax.y1) / 2, ylabel, rotate=-90)
    return c.render()
