"""Minimal SVG line charts for regret curves (no plotting dependency)."""
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"]


def _nice_ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


def _fmt(v):
    return f"{v:.6g}"


def regret_svg(curves, bounds=(), title="Cumulative regret", width=720, height=440):
    """Render curves as an SVG document string.

    ``curves`` is a list of ``(label, rounds, median, q25, q75)``; the
    interquartile band is shaded. ``bounds`` is a list of
    ``(label, rounds, values)`` drawn dashed.
    """
    left, right, top, bottom = 70, 170, 40, 50
    pw, ph = width - left - right, height - top - bottom

    xs = [np.asarray(c[1], float) for c in curves] + [np.asarray(b[1], float) for b in bounds]
    ys = [np.asarray(c[4], float) for c in curves] + [np.asarray(b[2], float) for b in bounds]
    x_max = max((x.max() for x in xs if x.size), default=1.0)
    y_max = max((y.max() for y in ys if y.size), default=1.0)
    x_ticks = _nice_ticks(0.0, x_max)
    y_ticks = _nice_ticks(0.0, y_max)
    x_hi = max(x_ticks[-1], x_max) or 1.0
    y_hi = max(y_ticks[-1], y_max) or 1.0

    def sx(v):
        return left + pw * np.asarray(v, float) / x_hi

    def sy(v):
        return top + ph * (1.0 - np.asarray(v, float) / y_hi)

    def points(x, y):
        return " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(sx(x), sy(y)))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for t in x_ticks:
        x = sx(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{top + ph}" x2="{_fmt(x)}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{top + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in y_ticks:
        y = sy(t)
        out.append(f'<line x1="{left - 5}" y1="{_fmt(y)}" x2="{left}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_fmt(y + 4)}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">round</text>')
    out.append(f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2})">cumulative regret</text>')

    legend_y = top + 10
    for k, (label, rounds, med, q25, q75) in enumerate(curves):
        color = PALETTE[k % len(PALETTE)]
        rounds = np.asarray(rounds, float)
        band = points(rounds, q75) + " " + points(rounds[::-1], np.asarray(q25, float)[::-1])
        out.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        out.append(f'<polyline points="{points(rounds, med)}" fill="none" stroke="{color}" stroke-width="2"/>')
        out.append(f'<line x1="{left + pw + 15}" y1="{legend_y}" x2="{left + pw + 40}" y2="{legend_y}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 45}" y="{legend_y + 4}">{escape(str(label))}</text>')
        legend_y += 18
    for k, (label, rounds, values) in enumerate(bounds):
        out.append(f'<polyline points="{points(rounds, values)}" fill="none" stroke="#555" '
                   f'stroke-dasharray="{4 + 2 * k},3" stroke-width="1.5"/>')
        out.append(f'<line x1="{left + pw + 15}" y1="{legend_y}" x2="{left + pw + 40}" y2="{legend_y}" '
                   f'stroke="#555" stroke-dasharray="{4 + 2 * k},3"/>')
        out.append(f'<text x="{left + pw + 45}" y="{legend_y + 4}">{escape(str(label))}</text>')
        legend_y += 18
    out.append("</svg>")
    return "\n".join(out) + "\n"
