"""Dependency-free SVG figures: reliability diagrams and bin-size bar charts.

Output is a pure function of the input numbers, so figures are byte-stable.
"""

import csv
import io
from xml.sax.saxutils import escape

SIZE = 420
MARGIN = 50
PLOT = SIZE - 2 * MARGIN
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _x(v):
    return MARGIN + v * PLOT


def _y(v):
    return SIZE - MARGIN - v * PLOT


def _f(v):
    return f"{v:.2f}"


def _frame(title, xlabel, ylabel, y_ticks):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
        f'<text x="{SIZE / 2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT}" height="{PLOT}" fill="none" stroke="#333"/>',
    ]
    for i in range(5):
        t = i / 4
        parts.append(f'<text x="{_f(_x(t))}" y="{SIZE - MARGIN + 16}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{t:g}</text>')
    for value, label in y_ticks:
        parts.append(f'<text x="{MARGIN - 6}" y="{_f(_y(value) + 3)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{label}</text>')
    parts.append(f'<text x="{SIZE / 2}" y="{SIZE - 12}" text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12">{escape(xlabel)}</text>')
    parts.append(f'<text x="14" y="{SIZE / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 14 {SIZE / 2})">{escape(ylabel)}</text>')
    return parts


def reliability_svg(curves, title="Reliability diagram"):
    """``curves`` maps a label to a reliability series of (confidence, accuracy, members)."""
    parts = _frame(title, "Confidence", "Accuracy", [(i / 4, f"{i / 4:g}") for i in range(5)])
    parts.append(f'<line x1="{_f(_x(0))}" y1="{_f(_y(0))}" x2="{_f(_x(1))}" y2="{_f(_y(1))}" '
                 'stroke="#888" stroke-dasharray="4 4"/>')
    for i, (label, series) in enumerate(curves.items()):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{_f(_x(c))},{_f(_y(a))}" for c, a, _ in series)
        if pts:
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for c, a, _ in series:
            parts.append(f'<circle cx="{_f(_x(c))}" cy="{_f(_y(a))}" r="2.5" fill="{color}"/>')
        ly = MARGIN + 14 + 16 * i
        parts.append(f'<line x1="{MARGIN + 8}" y1="{ly}" x2="{MARGIN + 28}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{MARGIN + 34}" y="{ly + 4}" font-family="sans-serif" font-size="11">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def reliability_csv(curves):
    """Numbers behind :func:`reliability_svg`: one row per curve point."""
    fh = io.StringIO()
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["curve", "point", "confidence", "accuracy", "members", "fraction"])
    for label, series in curves.items():
        total = sum(m for _, _, m in series)
        for i, (c, a, m) in enumerate(series, start=1):
            w.writerow([label, i, repr(c), repr(a), m, repr(m / total)])
    return fh.getvalue()


def bin_sizes_svg(bins, title="Bin sizes"):
    """Bar chart of the share of predictions falling in each bin."""
    total = sum(b.members for b in bins) or 1
    top = max((b.members / total for b in bins), default=0) or 1
    parts = _frame(title, "Probability", "Share of predictions",
                   [(i / 4, f"{top * i / 4:.2f}") for i in range(5)])
    for b in bins:
        if b.empty:
            continue
        h = b.members / total / top
        x0, x1 = _x(b.lo), _x(b.hi)
        parts.append(f'<rect x="{_f(x0)}" y="{_f(_y(h))}" width="{_f(max(x1 - x0, 0.5))}" '
                     f'height="{_f(h * PLOT)}" fill="{COLORS[0]}" stroke="white" stroke-width="0.5"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
