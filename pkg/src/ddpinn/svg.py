"""
Minimal self-contained SVG charts: line plots, grouped bars and heatmaps with
iso-lines. Just enough to look at results without a plotting stack.
"""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
W, H = 640, 420
ML, MR, MT, MB = 70, 150, 40, 50


def _fmt(v: float) -> str:
    return f"{v:.4g}"


class _Axes:
    def __init__(self, xlim, ylim, logy=False):
        self.x0, self.x1 = xlim
        self.logy = logy
        y0, y1 = ylim
        if logy:
            y0, y1 = np.log10(y0), np.log10(y1)
        self.y0, self.y1 = y0, y1
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y1 + 0.5

    def px(self, x):
        return ML + (np.asarray(x, float) - self.x0) / (self.x1 - self.x0) * (W - ML - MR)

    def py(self, y):
        y = np.asarray(y, float)
        if self.logy:
            y = np.log10(np.maximum(y, 1e-300))
        return H - MB - (y - self.y0) / (self.y1 - self.y0) * (H - MT - MB)


def _frame(ax: _Axes, title, xlabel, ylabel, xticks=True) -> list[str]:
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2 - MR / 2:.0f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" fill="none" stroke="black"/>',
           f'<text x="{(ML + W - MR) / 2:.0f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="16" y="{(MT + H - MB) / 2:.0f}" text-anchor="middle" '
           f'transform="rotate(-90 16 {(MT + H - MB) / 2:.0f})">{escape(ylabel)}</text>']
    if xticks:
        for x in np.linspace(ax.x0, ax.x1, 6):
            out.append(f'<text x="{ax.px(x):.1f}" y="{H - MB + 16}" text-anchor="middle">{_fmt(x)}</text>')
    for y in np.linspace(ax.y0, ax.y1, 6):
        label = _fmt(10**y) if ax.logy else _fmt(y)
        ypx = H - MB - (y - ax.y0) / (ax.y1 - ax.y0) * (H - MT - MB)
        out.append(f'<text x="{ML - 6}" y="{ypx + 4:.1f}" text-anchor="end">{label}</text>')
    return out


def _legend(labels) -> list[str]:
    out = []
    for k, label in enumerate(labels):
        y = MT + 14 + 18 * k
        c = PALETTE[k % len(PALETTE)]
        out.append(f'<rect x="{W - MR + 10}" y="{y - 9}" width="12" height="10" fill="{c}"/>')
        out.append(f'<text x="{W - MR + 28}" y="{y}">{escape(str(label))}</text>')
    return out


def _write(path, parts) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts + ["</svg>"]) + "\n")
    return path


def line_plot(path, series, title="", xlabel="", ylabel="", bands=(), logy=False) -> Path:
    """``series``: iterable of ``(label, x, y)`` or ``(label, x, y, dashed)``.

    ``bands`` shades ``(x_lo, x_hi)`` spans, e.g. data windows.
    """
    series = list(series)
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    ys = ys[np.isfinite(ys)]
    if logy:
        ys = ys[ys > 0]
    ylim = (ys.min(), ys.max()) if ys.size else (0.0, 1.0)
    ax = _Axes((xs.min(), xs.max()), ylim, logy)
    out = _frame(ax, title, xlabel, ylabel)
    for lo, hi in bands:
        out.append(f'<rect x="{ax.px(lo):.1f}" y="{MT}" width="{ax.px(hi) - ax.px(lo):.1f}" '
                   f'height="{H - MT - MB}" fill="#cccccc" fill-opacity="0.35"/>')
    for k, s in enumerate(series):
        x, y = np.asarray(s[1], float), np.asarray(s[2], float)
        ok = np.isfinite(y) & ((y > 0) if logy else True)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(ax.px(x[ok]), ax.py(y[ok])))
        dash = ' stroke-dasharray="6,3"' if len(s) > 3 and s[3] else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[k % len(PALETTE)]}" '
                   f'stroke-width="1.6"{dash}/>')
    out += _legend([s[0] for s in series])
    return _write(path, out)


def bar_chart(path, categories, groups: dict, title="", ylabel="", logy=False) -> Path:
    """Grouped bars: one cluster per category, one bar per entry of ``groups``."""
    categories = list(categories)
    vals = np.array([[float(v) for v in groups[g]] for g in groups])
    finite = vals[np.isfinite(vals)]
    if logy:
        finite = finite[finite > 0]
        lo = finite.min() / 2 if finite.size else 1e-6
        ylim = (lo, finite.max() * 2 if finite.size else 1.0)
    else:
        ylim = (min(0.0, finite.min()) if finite.size else 0.0, finite.max() * 1.1 if finite.size else 1.0)
    ax = _Axes((0.0, float(len(categories))), ylim, logy)
    out = _frame(ax, title, "", ylabel, xticks=False)
    ng = len(groups)
    bw = 0.8 / max(ng, 1)
    base = ax.py(ylim[0])
    for ci, cat in enumerate(categories):
        out.append(f'<text x="{ax.px(ci + 0.5):.1f}" y="{H - MB + 16}" text-anchor="middle">{escape(str(cat))}</text>')
        for gi in range(ng):
            v = vals[gi, ci]
            if not np.isfinite(v) or (logy and v <= 0):
                continue
            x = ax.px(ci + 0.1 + gi * bw)
            top = ax.py(v)
            out.append(f'<rect x="{x:.1f}" y="{min(top, base):.1f}" width="{ax.px(bw) - ax.px(0):.1f}" '
                       f'height="{abs(base - top):.1f}" fill="{PALETTE[gi % len(PALETTE)]}"/>')
    out += _legend(list(groups))
    return _write(path, out)


def _ramp_color(f: float) -> str:
    # dark blue -> white -> dark red
    f = min(max(f, 0.0), 1.0)
    if f < 0.5:
        g = f / 0.5
        r, gg, b = 40 + 215 * g, 70 + 185 * g, 160 + 95 * g
    else:
        g = (f - 0.5) / 0.5
        r, gg, b = 255 - 75 * g, 255 - 215 * g, 255 - 215 * g
    return f"rgb({r:.0f},{gg:.0f},{b:.0f})"


def _isolines(x, y, Z, level):
    """Marching squares: line segments where ``Z`` crosses ``level`` (``Z[i, j]`` at ``x[i], y[j]``)."""
    segs = []
    for i in range(len(x) - 1):
        for j in range(len(y) - 1):
            corners = [(x[i], y[j], Z[i, j]), (x[i + 1], y[j], Z[i + 1, j]),
                       (x[i + 1], y[j + 1], Z[i + 1, j + 1]), (x[i], y[j + 1], Z[i, j + 1])]
            if not all(np.isfinite(c[2]) for c in corners):
                continue
            pts = []
            for k in range(4):
                (xa, ya, za), (xb, yb, zb) = corners[k], corners[(k + 1) % 4]
                if (za < level) != (zb < level):
                    f = (level - za) / (zb - za)
                    pts.append((xa + f * (xb - xa), ya + f * (yb - ya)))
            for a in range(0, len(pts) - 1, 2):
                segs.append((pts[a], pts[a + 1]))
    return segs


def heatmap(path, x, y, Z, title="", xlabel="", ylabel="", n_levels: int = 10, log=False,
            markers=()) -> Path:
    """Colour map of ``Z[i, j]`` at ``(x[i], y[j])`` with iso-lines; ``markers`` are ``(label, x, y)``."""
    x, y, Z = np.asarray(x, float), np.asarray(y, float), np.asarray(Z, float)
    V = np.log10(np.maximum(Z, 1e-300)) if log else Z
    finite = V[np.isfinite(V)]
    vmin, vmax = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
    span = vmax - vmin or 1.0
    ax = _Axes((x.min(), x.max()), (y.min(), y.max()))
    out = _frame(ax, title, xlabel, ylabel)
    dx = np.gradient(x) if x.size > 1 else np.ones(1)
    dy = np.gradient(y) if y.size > 1 else np.ones(1)
    for i in range(x.size):
        for j in range(y.size):
            v = V[i, j]
            color = "#000000" if not np.isfinite(v) else _ramp_color((v - vmin) / span)
            x0, x1 = ax.px(x[i] - dx[i] / 2), ax.px(x[i] + dx[i] / 2)
            y0, y1 = ax.py(y[j] + dy[j] / 2), ax.py(y[j] - dy[j] / 2)
            out.append(f'<rect x="{max(x0, ML):.2f}" y="{max(y0, MT):.2f}" '
                       f'width="{min(x1, W - MR) - max(x0, ML):.2f}" '
                       f'height="{min(y1, H - MB) - max(y0, MT):.2f}" fill="{color}"/>')
    for level in np.linspace(vmin, vmax, n_levels + 2)[1:-1]:
        for (xa, ya), (xb, yb) in _isolines(x, y, V, level):
            out.append(f'<line x1="{ax.px(xa):.2f}" y1="{ax.py(ya):.2f}" x2="{ax.px(xb):.2f}" '
                       f'y2="{ax.py(yb):.2f}" stroke="black" stroke-width="0.6"/>')
    for k, (label, mx, my) in enumerate(markers):
        out.append(f'<circle cx="{ax.px(mx):.1f}" cy="{ax.py(my):.1f}" r="4" '
                   f'fill="{PALETTE[(k + 2) % len(PALETTE)]}" stroke="black"/>')
    # colour bar
    for k in range(50):
        f = k / 49
        yk = H - MB - f * (H - MT - MB)
        out.append(f'<rect x="{W - MR + 14}" y="{yk - (H - MT - MB) / 49:.1f}" width="14" '
                   f'height="{(H - MT - MB) / 49 + 0.5:.1f}" fill="{_ramp_color(f)}"/>')
    lo_label = _fmt(10**vmin) if log else _fmt(vmin)
    hi_label = _fmt(10**vmax) if log else _fmt(vmax)
    out.append(f'<text x="{W - MR + 32}" y="{H - MB}">{lo_label}</text>')
    out.append(f'<text x="{W - MR + 32}" y="{MT + 8}">{hi_label}</text>')
    for k, (label, _, _) in enumerate(markers):
        yk = MT + 40 + 16 * k
        out.append(f'<circle cx="{W - MR + 66}" cy="{yk - 4}" r="4" fill="{PALETTE[(k + 2) % len(PALETTE)]}"/>')
        out.append(f'<text x="{W - MR + 74}" y="{yk}">{escape(label)}</text>')
    return _write(path, out)
