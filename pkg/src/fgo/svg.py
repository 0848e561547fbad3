"""Minimal self-contained SVG charts.

Coordinates are printed with fixed precision so identical data gives
identical bytes; a timestamp comment is added only when asked for.
"""
from datetime import datetime, timezone
from html import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")

PANEL_W, PANEL_H = 420, 300
MARGIN = dict(left=60, right=20, top=36, bottom=48)


def _f(v):
    return f"{v:.2f}"


class _Panel:
    def __init__(self, x0, y0, xlim, ylim):
        self.x0, self.y0 = x0, y0
        self.xlim = xlim
        self.ylim = ylim
        self.w = PANEL_W - MARGIN["left"] - MARGIN["right"]
        self.h = PANEL_H - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        lo, hi = self.xlim
        return self.x0 + MARGIN["left"] + (x - lo) / (hi - lo) * self.w

    def py(self, y):
        lo, hi = self.ylim
        return self.y0 + MARGIN["top"] + (1.0 - (y - lo) / (hi - lo)) * self.h


def _limits(values, pad=0.05, floor_zero=False):
    arr = np.asarray([v for v in values if np.isfinite(v)], dtype=np.float64)
    if arr.size == 0:
        return 0.0, 1.0
    lo, hi = float(arr.min()), float(arr.max())
    if floor_zero:
        lo = min(lo, 0.0)
    if hi - lo < 1e-12:
        hi = lo + 1.0
    span = hi - lo
    return lo - (0.0 if floor_zero and lo == 0.0 else pad * span), hi + pad * span


def _axes(p: _Panel, title, xlabel, ylabel):
    left, right = p.px(p.xlim[0]), p.px(p.xlim[1])
    bottom, top = p.py(p.ylim[0]), p.py(p.ylim[1])
    out = [
        f'<rect x="{_f(left)}" y="{_f(top)}" width="{_f(right - left)}" height="{_f(bottom - top)}" '
        'fill="none" stroke="#444"/>',
        f'<text x="{_f((left + right) / 2)}" y="{_f(p.y0 + 22)}" text-anchor="middle" '
        f'font-size="14">{escape(title)}</text>',
        f'<text x="{_f((left + right) / 2)}" y="{_f(bottom + 36)}" text-anchor="middle" '
        f'font-size="12">{escape(xlabel)}</text>',
        f'<text x="{_f(p.x0 + 14)}" y="{_f((top + bottom) / 2)}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 {_f(p.x0 + 14)} {_f((top + bottom) / 2)})">{escape(ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        y = p.ylim[0] + frac * (p.ylim[1] - p.ylim[0])
        out.append(f'<text x="{_f(left - 4)}" y="{_f(p.py(y) + 4)}" text-anchor="end" '
                   f'font-size="10">{y:.3g}</text>')
    return out


def _legend(p: _Panel, names):
    out = []
    x = p.px(p.xlim[1]) - 110
    for i, name in enumerate(names):
        y = p.py(p.ylim[1]) + 14 + 14 * i
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{_f(x)}" y="{_f(y - 8)}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{_f(x + 14)}" y="{_f(y + 1)}" font-size="11">{escape(name)}</text>')
    return out


def _document(width, height, body, stamp):
    head = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            '<rect width="100%" height="100%" fill="white"/>']
    if stamp:
        head.append(f"<!-- generated {datetime.now(timezone.utc).isoformat(timespec='seconds')} -->")
    return "\n".join(head + body + ["</svg>"]) + "\n"


def line_panel(x0, y0, series, title, xlabel, ylabel, xlim=None, ylim=None):
    """SVG elements for one panel of ``{name: (xs, ys)}`` polylines."""
    xs_all = [v for xs, _ in series.values() for v in xs]
    ys_all = [v for _, ys in series.values() for v in ys]
    p = _Panel(x0, y0, xlim or _limits(xs_all, pad=0.0), ylim or _limits(ys_all, floor_zero=True))
    out = _axes(p, title, xlabel, ylabel)
    for i, (xs, ys) in enumerate(series.values()):
        pts = " ".join(f"{_f(p.px(x))},{_f(p.py(y))}" for x, y in zip(xs, ys) if np.isfinite(y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[i % len(PALETTE)]}" '
                   'stroke-width="1.5"/>')
    return out + _legend(p, list(series))


def line_chart(series, title, xlabel, ylabel, stamp=False):
    return _document(PANEL_W, PANEL_H, line_panel(0, 0, series, title, xlabel, ylabel), stamp)


def panels(panel_specs, stamp=False):
    """Side-by-side line panels; each spec is ``(series, title, xlabel, ylabel)``.

    Panels share a y range so their heights are comparable.
    """
    ys_all = [v for series, *_ in panel_specs for _, ys in series.values() for v in ys]
    ylim = _limits(ys_all, floor_zero=True)
    body = []
    for i, (series, title, xlabel, ylabel) in enumerate(panel_specs):
        body += line_panel(i * PANEL_W, 0, series, title, xlabel, ylabel, ylim=ylim)
    return _document(PANEL_W * len(panel_specs), PANEL_H, body, stamp)


def bar_chart(labels, values, title, ylabel, errors=None, highlight=None, stamp=False):
    """Vertical bars with optional symmetric error whiskers; ``highlight`` indexes a bar to colour."""
    values = np.asarray(values, dtype=np.float64)
    errors = np.zeros_like(values) if errors is None else np.asarray(errors, dtype=np.float64)
    n = len(labels)
    p = _Panel(0, 0, (0.0, float(max(n, 1))), _limits(np.concatenate([values + errors, [0.0]]),
                                                     floor_zero=True))
    body = _axes(p, title, "", ylabel)
    base = p.py(max(p.ylim[0], 0.0))
    for i, (label, v, e) in enumerate(zip(labels, values, errors)):
        left, right = p.px(i + 0.15), p.px(i + 0.85)
        top = p.py(v)
        color = PALETTE[1] if i == highlight else PALETTE[0]
        body.append(f'<rect x="{_f(left)}" y="{_f(min(top, base))}" width="{_f(right - left)}" '
                    f'height="{_f(abs(base - top))}" fill="{color}"/>')
        mid = (left + right) / 2
        if e > 0:
            body.append(f'<line x1="{_f(mid)}" y1="{_f(p.py(v - e))}" x2="{_f(mid)}" '
                        f'y2="{_f(p.py(v + e))}" stroke="#222"/>')
        body.append(f'<text x="{_f(mid)}" y="{_f(p.py(p.ylim[0]) + 14)}" text-anchor="middle" '
                    f'font-size="10">{escape(str(label))}</text>')
    return _document(PANEL_W, PANEL_H, body, stamp)
