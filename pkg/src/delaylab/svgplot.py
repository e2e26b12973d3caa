"""Minimal SVG line plots: axes, ticks, optional log-scale y, legend, markers."""
from __future__ import annotations

import json
import math
from html import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf", "#393b79"]


def _nice_ticks(lo, hi, n=6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _fmt(v):
    if v == 0:
        return "0"
    a = abs(v)
    if a >= 1e4 or a < 1e-3:
        return f"{v:.0e}"
    return f"{v:.6g}"


class Plot:
    def __init__(self, title="", xlabel="", ylabel="", logy=False, width=720, height=480,
                 equal_aspect=False, ylim=None, legend="left", xlim=None):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.logy = logy
        self.width, self.height = width, height
        self.equal_aspect = equal_aspect
        self.xlim = xlim
        self.ylim = ylim  # fixed (lo, hi) y-window; data outside is clipped
        self.legend = legend
        self.series = []
        self.vlines = []
        self.metadata = None

    def line(self, xs, ys, label=None, color=None, dashed=False, points=False):
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        color = color or PALETTE[len(self.series) % len(PALETTE)]
        self.series.append((xs, ys, label, color, dashed, points))
        return self

    def vline(self, x, label=None, color="#555555"):
        self.vlines.append((float(x), label, color))
        return self

    def _ty(self, y):
        if self.logy:
            return np.log10(np.clip(y, 1e-300, None))
        return y

    def render(self) -> str:
        W, H = self.width, self.height
        ml, mr, mt, mb = 80, 20, 40, 55
        pw, ph = W - ml - mr, H - mt - mb

        xs_all = [s[0][np.isfinite(s[0])] for s in self.series]
        ys_all = [self._ty(s[1][np.isfinite(s[1]) & ((s[1] > 0) if self.logy else True)])
                  for s in self.series]
        xs_all = np.concatenate(xs_all + [np.array([v[0] for v in self.vlines])]) \
            if self.series or self.vlines else np.array([0.0, 1.0])
        ys_all = np.concatenate(ys_all) if ys_all else np.array([0.0, 1.0])
        if xs_all.size == 0:
            xs_all = np.array([0.0, 1.0])
        if ys_all.size == 0:
            ys_all = np.array([0.0, 1.0])
        x0, x1 = float(xs_all.min()), float(xs_all.max())
        y0, y1 = float(ys_all.min()), float(ys_all.max())
        if self.xlim is not None:
            x0, x1 = map(float, self.xlim)
            keep = [(s[0] >= x0) & (s[0] <= x1) for s in self.series]
            ys_in = [self._ty(s[1][k & np.isfinite(s[1]) & ((s[1] > 0) if self.logy else True)])
                     for s, k in zip(self.series, keep)]
            ys_in = np.concatenate(ys_in) if ys_in else np.array([])
            if ys_in.size:
                y0, y1 = float(ys_in.min()), float(ys_in.max())
        if x1 <= x0:
            x1 = x0 + 1.0
        if y1 <= y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        pad = 0.03 * (y1 - y0)
        y0, y1 = y0 - pad, y1 + pad
        if self.ylim is not None:
            y0, y1 = (float(v) for v in self._ty(np.asarray(self.ylim, float)))
        if self.equal_aspect:
            sx, sy = (x1 - x0) / pw, (y1 - y0) / ph
            s = max(sx, sy)
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            x0, x1 = cx - s * pw / 2, cx + s * pw / 2
            y0, y1 = cy - s * ph / 2, cy + s * ph / 2

        def px(x):
            return ml + (x - x0) / (x1 - x0) * pw

        def py(y):
            return mt + ph - (y - y0) / (y1 - y0) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">'
        ]
        if self.metadata is not None:
            out.append(f"<metadata>{escape(json.dumps(self.metadata, sort_keys=True))}</metadata>")
        out.append(f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>')
        out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')

        for v in _nice_ticks(x0, x1):
            X = px(v)
            out.append(f'<line x1="{X:.2f}" y1="{mt + ph}" x2="{X:.2f}" y2="{mt + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{X:.2f}" y="{mt + ph + 18}" text-anchor="middle">{_fmt(v)}</text>')
        if self.logy:
            yticks = list(range(math.ceil(y0), math.floor(y1) + 1))
            step = max(1, len(yticks) // 8)
            yticks = yticks[::step]
            labels = [f"1e{v}" for v in yticks]
        else:
            yticks = _nice_ticks(y0, y1)
            labels = [_fmt(v) for v in yticks]
        for v, lab in zip(yticks, labels):
            Y = py(v)
            out.append(f'<line x1="{ml - 5}" y1="{Y:.2f}" x2="{ml}" y2="{Y:.2f}" stroke="black"/>')
            out.append(f'<text x="{ml - 8}" y="{Y + 4:.2f}" text-anchor="end">{lab}</text>')

        out.append(f'<clipPath id="plotarea"><rect x="{ml}" y="{mt}" width="{pw}" height="{ph}"/></clipPath>')
        out.append('<g clip-path="url(#plotarea)">')
        for xs, ys, label, color, dashed, points in self.series:
            ok = np.isfinite(xs) & np.isfinite(ys)
            if self.logy:
                ok &= ys > 0
            ty = self._ty(ys[ok])
            coords = [f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs[ok], ty)]
            if points:
                for c in coords:
                    cx, cy = c.split(",")
                    out.append(f'<circle cx="{cx}" cy="{cy}" r="1.6" fill="{color}"/>')
            elif coords:
                dash = ' stroke-dasharray="6,4"' if dashed else ""
                out.append(
                    f'<polyline fill="none" stroke="{color}" stroke-width="1.4"{dash} '
                    f'points="{" ".join(coords)}"/>'
                )
        for x, label, color in self.vlines:
            X = px(x)
            out.append(f'<line x1="{X:.2f}" y1="{mt}" x2="{X:.2f}" y2="{mt + ph}" '
                       f'stroke="{color}" stroke-dasharray="3,3"/>')
        out.append("</g>")

        legend = [(s[2], s[3]) for s in self.series if s[2]]
        lx = ml + 10 if self.legend == "left" else ml + pw - 150
        for i, (label, color) in enumerate(legend):
            Y = mt + 14 + 16 * i
            out.append(f'<line x1="{lx}" y1="{Y - 4}" x2="{lx + 20}" y2="{Y - 4}" '
                       f'stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{lx + 25}" y="{Y}">{escape(label)}</text>')

        out.append(f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(self.title)}</text>')
        out.append(f'<text x="{ml + pw / 2}" y="{H - 12}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {mt + ph / 2})">{escape(self.ylabel)}</text>')
        out.append("</svg>")
        return "\n".join(out)

    def save(self, path, metadata=None):
        if metadata is not None:
            self.metadata = metadata
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())
