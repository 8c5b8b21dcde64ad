"""Minimal deterministic SVG rendering for loss curves, xy trajectories, and
stability heatmaps.

Fixed 800x600 canvas, no timestamps or randomness: identical inputs yield
byte-identical files.  Output is assembled in memory and written last, so a
rendering error never leaves a partial file behind.
"""

from __future__ import annotations

import math

WIDTH = 800
HEIGHT = 600
MARGIN_L = 80
MARGIN_R = 30
MARGIN_T = 40
MARGIN_B = 60

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

COMPLETED_FILL = "#4878cf"
DIVERGED_FILL = "#d1493e"
OTHER_FILL = "#999999"


class PlotError(ValueError):
    """Input unsuitable for the requested plot kind."""


def _fmt(x: float) -> str:
    return format(x, ".2f")


def _tick_label(x: float) -> str:
    return format(x, ".4g")


class _Axes:
    """Linear (or log10) data-to-pixel mapping inside the fixed margins."""

    def __init__(self, xmin, xmax, ymin, ymax, log_y=False):
        if log_y:
            if ymin <= 0:
                raise PlotError("log scale requires positive values")
            ymin, ymax = math.log10(ymin), math.log10(ymax)
        if xmax == xmin:
            xmax = xmin + 1.0
        if ymax == ymin:
            ymax = ymin + 1.0
        self.xmin, self.xmax = xmin, xmax
        self.ymin, self.ymax = ymin, ymax
        self.log_y = log_y

    def px(self, x: float) -> float:
        frac = (x - self.xmin) / (self.xmax - self.xmin)
        return MARGIN_L + frac * (WIDTH - MARGIN_L - MARGIN_R)

    def py(self, y: float) -> float:
        if self.log_y:
            y = math.log10(y) if y > 0 else self.ymin
        frac = (y - self.ymin) / (self.ymax - self.ymin)
        return HEIGHT - MARGIN_B - frac * (HEIGHT - MARGIN_T - MARGIN_B)


def _axes_elements(ax: _Axes, title: str, xlabel: str, ylabel: str) -> list:
    parts = [
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{WIDTH - MARGIN_L - MARGIN_R}" '
        f'height="{HEIGHT - MARGIN_T - MARGIN_B}" fill="none" stroke="black"/>',
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 16}" text-anchor="middle" font-size="13">{xlabel}</text>',
        f'<text x="20" y="{HEIGHT // 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 20 {HEIGHT // 2})">{ylabel}</text>',
    ]
    for i in range(5):
        fx = i / 4.0
        xv = ax.xmin + fx * (ax.xmax - ax.xmin)
        px = _fmt(ax.px(xv))
        parts.append(
            f'<line x1="{px}" y1="{HEIGHT - MARGIN_B}" x2="{px}" '
            f'y2="{HEIGHT - MARGIN_B + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px}" y="{HEIGHT - MARGIN_B + 20}" text-anchor="middle" '
            f'font-size="11">{_tick_label(xv)}</text>'
        )
        yv = ax.ymin + fx * (ax.ymax - ax.ymin)
        label = _tick_label(10.0 ** yv) if ax.log_y else _tick_label(yv)
        frac = (yv - ax.ymin) / (ax.ymax - ax.ymin)
        py = _fmt(HEIGHT - MARGIN_B - frac * (HEIGHT - MARGIN_T - MARGIN_B))
        parts.append(
            f'<line x1="{MARGIN_L - 5}" y1="{py}" x2="{MARGIN_L}" y2="{py}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{MARGIN_L - 8}" y="{py}" text-anchor="end" '
            f'font-size="11" dy="4">{label}</text>'
        )
    return parts


def _legend(labels: list) -> list:
    parts = []
    for i, label in enumerate(labels):
        color = PALETTE[i % len(PALETTE)]
        y = MARGIN_T + 16 + 18 * i
        x = WIDTH - MARGIN_R - 150
        parts.append(f'<line x1="{x}" y1="{y}" x2="{x + 24}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{x + 30}" y="{y + 4}" font-size="12">{label}</text>')
    return parts


def _document(parts: list) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">\n'
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n'
    )
    return head + "\n".join(parts) + "\n</svg>\n"


def _polyline(ax: _Axes, xs, ys, color: str) -> str:
    pts = " ".join(f"{_fmt(ax.px(x))},{_fmt(ax.py(y))}" for x, y in zip(xs, ys))
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'


def loss_curves(series: list, out_path, log: bool = False, title: str = "loss"):
    """series: list of (label, steps, losses).  Positive losses only when
    log=True (zero/negative entries are dropped there)."""
    if not series:
        raise PlotError("no series to plot")
    cleaned = []
    for label, xs, ys in series:
        if len(xs) == 0:
            raise PlotError(f"series {label!r} is empty")
        if log:
            pairs = [(x, y) for x, y in zip(xs, ys) if y > 0]
            if not pairs:
                raise PlotError(f"series {label!r} has no positive values for log scale")
            xs = [p[0] for p in pairs]
            ys = [p[1] for p in pairs]
        cleaned.append((label, list(xs), list(ys)))
    xmin = min(min(xs) for _, xs, _ in cleaned)
    xmax = max(max(xs) for _, xs, _ in cleaned)
    ymin = min(min(ys) for _, _, ys in cleaned)
    ymax = max(max(ys) for _, _, ys in cleaned)
    ax = _Axes(xmin, xmax, ymin, ymax, log_y=log)
    parts = _axes_elements(ax, title, "step", "loss (log10)" if log else "loss")
    for i, (label, xs, ys) in enumerate(cleaned):
        parts.append(_polyline(ax, xs, ys, PALETTE[i % len(PALETTE)]))
    parts += _legend([label for label, _, _ in cleaned])
    _write(out_path, _document(parts))


def xy_trajectory(series: list, out_path, title: str = "trajectory"):
    """series: list of (label, xs, ys) parameter paths; the shared starting
    point is marked with a black dot."""
    if not series:
        raise PlotError("no series to plot")
    for label, xs, ys in series:
        if len(xs) == 0:
            raise PlotError(f"series {label!r} is empty")
    xmin = min(min(xs) for _, xs, _ in series)
    xmax = max(max(xs) for _, xs, _ in series)
    ymin = min(min(ys) for _, _, ys in series)
    ymax = max(max(ys) for _, _, ys in series)
    pad_x = 0.05 * (xmax - xmin or 1.0)
    pad_y = 0.05 * (ymax - ymin or 1.0)
    ax = _Axes(xmin - pad_x, xmax + pad_x, ymin - pad_y, ymax + pad_y)
    parts = _axes_elements(ax, title, "x", "y")
    for i, (label, xs, ys) in enumerate(series):
        parts.append(_polyline(ax, xs, ys, PALETTE[i % len(PALETTE)]))
    x0, y0 = series[0][1][0], series[0][2][0]
    parts.append(
        f'<circle cx="{_fmt(ax.px(x0))}" cy="{_fmt(ax.py(y0))}" r="5" fill="black"/>'
    )
    parts += _legend([label for label, _, _ in series])
    _write(out_path, _document(parts))


def stability_heatmap(rows: list, out_path, title: str = "stability"):
    """rows: sweep dicts with eta, rho, status for a single optimizer.
    Completed and Diverged cells get distinct fills."""
    if not rows:
        raise PlotError("no sweep rows to plot")
    optimizers = sorted({row["optimizer"] for row in rows})
    if len(optimizers) > 1:
        raise PlotError(
            f"heatmap needs a single optimizer, got {optimizers}; filter rows first"
        )
    etas = sorted({float(row["eta"]) for row in rows})
    rhos = sorted({float(row["rho"]) for row in rows})
    cell_w = (WIDTH - MARGIN_L - MARGIN_R) / len(etas)
    cell_h = (HEIGHT - MARGIN_T - MARGIN_B) / len(rhos)
    eta_pos = {v: i for i, v in enumerate(etas)}
    rho_pos = {v: i for i, v in enumerate(rhos)}
    parts = [
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-size="16">'
        f"{title} ({optimizers[0]})</text>",
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 16}" text-anchor="middle" font-size="13">eta</text>',
        f'<text x="20" y="{HEIGHT // 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 20 {HEIGHT // 2})">rho</text>',
    ]
    for row in rows:
        i = eta_pos[float(row["eta"])]
        j = rho_pos[float(row["rho"])]
        status = row["status"]
        if status == "completed":
            fill = COMPLETED_FILL
        elif status == "diverged":
            fill = DIVERGED_FILL
        else:
            fill = OTHER_FILL
        x = MARGIN_L + i * cell_w
        y = HEIGHT - MARGIN_B - (j + 1) * cell_h
        parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cell_w)}" '
            f'height="{_fmt(cell_h)}" fill="{fill}" stroke="white" stroke-width="0.5"/>'
        )
    # axis extremes only; dense grids make per-cell labels unreadable
    for v, anchor, x in ((etas[0], "start", MARGIN_L), (etas[-1], "end", WIDTH - MARGIN_R)):
        parts.append(
            f'<text x="{x}" y="{HEIGHT - MARGIN_B + 20}" text-anchor="{anchor}" '
            f'font-size="11">{_tick_label(v)}</text>'
        )
    for v, y in ((rhos[0], HEIGHT - MARGIN_B), (rhos[-1], MARGIN_T + 10)):
        parts.append(
            f'<text x="{MARGIN_L - 8}" y="{y}" text-anchor="end" font-size="11">{_tick_label(v)}</text>'
        )
    legend = [
        (COMPLETED_FILL, "completed"),
        (DIVERGED_FILL, "diverged"),
    ]
    for i, (fill, label) in enumerate(legend):
        x = WIDTH - MARGIN_R - 150
        y = MARGIN_T + 10 + 18 * i
        parts.append(f'<rect x="{x}" y="{y}" width="14" height="12" fill="{fill}"/>')
        parts.append(f'<text x="{x + 20}" y="{y + 10}" font-size="12">{label}</text>')
    _write(out_path, _document(parts))


def _write(path, text: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
