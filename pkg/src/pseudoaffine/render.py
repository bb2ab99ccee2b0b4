"""Plain-text SVG output for gap tables and branch graphs.

Coordinates are printed with a fixed number of decimals so that the same
inputs always give the same bytes.
"""

from __future__ import annotations

import numpy as np

from .cantor import GapTable
from .words import format_word

WIDTH = 800.0
MARGIN = 20.0
BAR_H = 14.0
BAR_GAP = 8.0
PANEL_H = 220.0

HULL = "#333333"
GAP = "#9ecae1"
HIGHLIGHT = "#e6550d"


def _f(x: float) -> str:
    return f"{x:.3f}"


def alternating_words(depth: int) -> set[str]:
    """The words (01)^k shorter than ``depth``."""
    return {"01" * k for k in range((depth + 1) // 2)}


def _bars(table: GapTable, levels: int, highlight: set[str], y0: float) -> list[str]:
    span = WIDTH - 2 * MARGIN
    out = []
    for n in range(levels):
        y = y0 + n * (BAR_H + BAR_GAP)
        for j in range(2 ** n):
            left = float(table.cyl_left[n][j])
            ln = float(table.cyl_len[n][j])
            out.append(f'<rect class="hull" x="{_f(MARGIN + span * left)}" y="{_f(y)}" '
                       f'width="{_f(span * ln)}" height="{_f(BAR_H)}" fill="{HULL}"/>')
        for j in range(2 ** n):
            w = format(j, f"0{n}b") if n else ""
            a, b = float(table.a[n][j]), float(table.b[n][j])
            cls, color = ("gap highlight", HIGHLIGHT) if w in highlight else ("gap", GAP)
            out.append(f'<rect class="{cls}" data-word="{format_word(w)}" '
                       f'x="{_f(MARGIN + span * a)}" y="{_f(y)}" width="{_f(span * (b - a))}" '
                       f'height="{_f(BAR_H)}" fill="{color}"/>')
    return out


def _panel(xs, curves, y0: float, title: str, lo: float, hi: float) -> list[str]:
    span = WIDTH - 2 * MARGIN
    h = PANEL_H - 30.0
    out = [f'<text x="{_f(MARGIN)}" y="{_f(y0 + 12)}" font-size="12">{title}</text>',
           f'<rect x="{_f(MARGIN)}" y="{_f(y0 + 20)}" width="{_f(span)}" height="{_f(h)}" '
           f'fill="none" stroke="#999999"/>']
    scale = hi - lo if hi > lo else 1.0
    colors = ("#3182bd", "#e6550d")
    for k, ys in enumerate(curves):
        pts = " ".join(f"{_f(MARGIN + span * x)},{_f(y0 + 20 + h * (1 - (y - lo) / scale))}"
                       for x, y in zip(xs, ys))
        out.append(f'<polyline class="branch{k}" fill="none" stroke="{colors[k]}" '
                   f'stroke-width="1" points="{pts}"/>')
    return out


def render_svg(table: GapTable, levels: int | None = None, highlight=(),
               branches=None, samples: int = 801) -> str:
    """Bars for levels 0..levels-1 (default: the table depth), then optional graphs.

    With ``branches`` two panels follow: the graphs of f0, f1 and of their
    derivatives, sampled on ``samples`` equally spaced points.
    """
    levels = table.depth if levels is None else levels
    if not 0 <= levels <= table.depth + 1:
        raise ValueError(f"cannot draw {levels} levels from a table of depth {table.depth}")
    highlight = set(highlight)
    body = _bars(table, levels, highlight, MARGIN)
    height = MARGIN * 2 + levels * (BAR_H + BAR_GAP)
    if branches is not None:
        xs = np.linspace(0.0, 1.0, samples)
        f = [branches.eval(i, xs) for i in (0, 1)]
        df = [branches.eval_derivative(i, xs) for i in (0, 1)]
        body += _panel(xs, f, height, "f0, f1", 0.0, 1.0)
        height += PANEL_H
        lo = min(float(np.min(d)) for d in df)
        hi = max(float(np.max(d)) for d in df)
        pad = 0.05 * (hi - lo) if hi > lo else 0.05
        body += _panel(xs, df, height, "f0', f1'", lo - pad, hi + pad)
        height += PANEL_H
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(WIDTH)}" '
            f'height="{_f(height)}" viewBox="0 0 {_f(WIDTH)} {_f(height)}">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="#ffffff"/>', *body,
                      "</svg>"]) + "\n"
