"""Tiny static SVG charts (polylines + axes), no plotting dependency.

Good enough for loss traces, spectra, and sweep curves; not a general
plotting library.
"""

from __future__ import annotations

import math

from .errors import ValidationError

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, count: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(count - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks


def line_chart(
    path: str,
    series: list,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    log_y: bool = False,
    width: int = 720,
    height: int = 440,
) -> None:
    """Write an SVG line chart.

    ``series`` is a list of (label, xs, ys) triples.  With log_y, zero or
    negative y values are dropped from that series.
    """
    if not series:
        raise ValidationError("need at least one series")
    margin_l, margin_r, margin_t, margin_b = 64, 16, 34, 48
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b

    cleaned = []
    for label, xs, ys in series:
        pairs = [
            (float(x), float(y))
            for x, y in zip(xs, ys)
            if not log_y or y > 0.0
        ]
        cleaned.append((str(label), pairs))
    points = [p for _, pairs in cleaned for p in pairs]
    if not points:
        raise ValidationError("no plottable points")
    xs_all = [p[0] for p in points]
    ys_all = [math.log10(p[1]) if log_y else p[1] for p in points]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x):
        return margin_l + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return margin_t + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'font-family="sans-serif" font-size="12">' % (width, height),
        '<rect width="%d" height="%d" fill="white"/>' % (width, height),
    ]
    if title:
        parts.append(
            '<text x="%d" y="20" text-anchor="middle" font-size="14">%s</text>'
            % (width // 2, _esc(title))
        )
    # axes
    parts.append(
        '<rect x="%d" y="%d" width="%d" height="%d" fill="none" stroke="#444"/>'
        % (margin_l, margin_t, plot_w, plot_h)
    )
    for t in _ticks(x_lo, x_hi):
        px = sx(t)
        parts.append(
            '<line x1="%.1f" y1="%d" x2="%.1f" y2="%d" stroke="#444"/>'
            % (px, margin_t + plot_h, px, margin_t + plot_h + 4)
        )
        parts.append(
            '<text x="%.1f" y="%d" text-anchor="middle">%s</text>'
            % (px, margin_t + plot_h + 18, _fmt(t))
        )
    for t in _ticks(y_lo, y_hi):
        py = sy(t)
        label = "1e%g" % t if log_y else _fmt(t)
        parts.append(
            '<line x1="%d" y1="%.1f" x2="%d" y2="%.1f" stroke="#444"/>'
            % (margin_l - 4, py, margin_l, py)
        )
        parts.append(
            '<text x="%d" y="%.1f" text-anchor="end" dy="4">%s</text>'
            % (margin_l - 8, py, label)
        )
    if x_label:
        parts.append(
            '<text x="%d" y="%d" text-anchor="middle">%s</text>'
            % (margin_l + plot_w // 2, height - 10, _esc(x_label))
        )
    if y_label:
        parts.append(
            '<text x="14" y="%d" text-anchor="middle" '
            'transform="rotate(-90 14 %d)">%s</text>'
            % (margin_t + plot_h // 2, margin_t + plot_h // 2, _esc(y_label))
        )
    for i, (label, pairs) in enumerate(cleaned):
        if not pairs:
            continue
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(
            "%.2f,%.2f" % (sx(x), sy(math.log10(y) if log_y else y))
            for x, y in pairs
        )
        parts.append(
            '<polyline points="%s" fill="none" stroke="%s" stroke-width="1.5"/>'
            % (coords, color)
        )
        parts.append(
            '<text x="%d" y="%d" fill="%s">%s</text>'
            % (margin_l + 10, margin_t + 16 + 16 * i, color, _esc(label))
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e6:
        return str(int(v))
    return "%.4g" % v
