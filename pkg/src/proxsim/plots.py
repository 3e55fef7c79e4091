"""Deterministic SVG plots with no plotting dependency.

The experiment suites emit small log-log charts (mean lines plus +-2SE
bands).  Rendering is pure string assembly with fixed float formatting, a
fixed viewbox, and no timestamps, so identical inputs produce byte-identical
files -- that determinism is part of the suite contract, not a nicety.

One <polyline> element per series carries the mean line; bands are
<polygon> elements; axes, ticks, and the legend are <line>/<text>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

PALETTE = ("#1f6fb2", "#c0392b", "#2a9d50", "#8e44ad", "#d08a00", "#16807a", "#5d6d7e")

_W, _H = 640, 440
_ML, _MR, _MT, _MB = 72, 24, 40, 56  # margins: left/right/top/bottom


@dataclass
class PlotSeries:
    """One named line: x values, y means, optional stderr for a 2SE band."""

    name: str
    xs: list
    ys: list
    ses: list | None = None

    def __post_init__(self):
        if len(self.xs) != len(self.ys):
            raise ValueError("series %r: xs and ys lengths differ" % (self.name,))
        if self.ses is not None and len(self.ses) != len(self.ys):
            raise ValueError("series %r: ses length differs" % (self.name,))


def _fmt(v: float) -> str:
    return "%.2f" % v


def _check_positive(series):
    for s in series:
        for v in list(s.xs) + list(s.ys):
            if not (v > 0) or not math.isfinite(v):
                raise ValueError(
                    "log-log plot needs positive finite data; series %r has %r" % (s.name, v)
                )


def _log_range(values):
    lo, hi = min(values), max(values)
    if lo == hi:
        # widen a flat axis by a factor of sqrt(10) each way so ticks exist
        return lo / math.sqrt(10.0), hi * math.sqrt(10.0)
    return lo, hi


def _decade_ticks(lo: float, hi: float):
    """Tick positions: powers of ten inside [lo, hi], plus 2x and 5x
    multiples when fewer than two decades are spanned."""
    k0 = math.floor(math.log10(lo) - 1e-12)
    k1 = math.ceil(math.log10(hi) + 1e-12)
    decades = [10.0 ** k for k in range(k0, k1 + 1) if lo * (1 - 1e-12) <= 10.0 ** k <= hi * (1 + 1e-12)]
    if len(decades) >= 3:
        return decades
    ticks = []
    for k in range(k0 - 1, k1 + 1):
        for mult in (1.0, 2.0, 5.0):
            v = mult * 10.0 ** k
            if lo * (1 - 1e-12) <= v <= hi * (1 + 1e-12):
                ticks.append(v)
    return ticks or [lo, hi]


def _tick_label(v: float) -> str:
    k = math.log10(v)
    if abs(k - round(k)) < 1e-9:
        return "1e%d" % round(k)
    return "%g" % v


class _LogMap:
    def __init__(self, lo, hi, out_lo, out_hi):
        self.a, self.b = math.log10(lo), math.log10(hi)
        self.lo, self.hi = out_lo, out_hi

    def __call__(self, v):
        t = (math.log10(v) - self.a) / (self.b - self.a)
        return self.lo + t * (self.hi - self.lo)


def render_loglog(
    series,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> str:
    """Render a log-log chart of the given PlotSeries list to an SVG string.

    Every series contributes exactly one <polyline> (its mean line) and, when
    stderrs are present, one <polygon> band spanning mean +- 2SE (clipped away
    from nonpositive values, where the log axis cannot show it).
    """
    series = list(series)
    if not series or all(len(s.xs) == 0 for s in series):
        raise ValueError("nothing to plot")
    _check_positive(series)

    xs_all = [v for s in series for v in s.xs]
    ys_all = [v for s in series for v in s.ys]
    # widen the y range to make room for visible bands
    y_candidates = list(ys_all)
    for s in series:
        if s.ses is not None:
            for y, se in zip(s.ys, s.ses):
                hi = y + 2.0 * se
                lo = y - 2.0 * se
                y_candidates.append(hi)
                if lo > 0:
                    y_candidates.append(lo)
    x_lo, x_hi = _log_range(xs_all)
    y_lo, y_hi = _log_range(y_candidates)

    fx = _LogMap(x_lo, x_hi, _ML, _W - _MR)
    fy = _LogMap(y_lo, y_hi, _H - _MB, _MT)  # inverted: larger y is higher up

    out = []
    out.append(
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 %d %d" '
        'width="%d" height="%d" font-family="Helvetica,Arial,sans-serif">' % (_W, _H, _W, _H)
    )
    out.append('<rect x="0" y="0" width="%d" height="%d" fill="#ffffff"/>' % (_W, _H))
    if title:
        out.append(
            '<text x="%d" y="24" font-size="15" text-anchor="middle" fill="#222222">%s</text>'
            % (_W // 2, _escape(title))
        )

    # gridlines + ticks
    for v in _decade_ticks(x_lo, x_hi):
        px = fx(v)
        out.append(
            '<line x1="%s" y1="%d" x2="%s" y2="%d" stroke="#dddddd" stroke-width="1"/>'
            % (_fmt(px), _MT, _fmt(px), _H - _MB)
        )
        out.append(
            '<text x="%s" y="%d" font-size="11" text-anchor="middle" fill="#444444">%s</text>'
            % (_fmt(px), _H - _MB + 16, _tick_label(v))
        )
    for v in _decade_ticks(y_lo, y_hi):
        py = fy(v)
        out.append(
            '<line x1="%d" y1="%s" x2="%d" y2="%s" stroke="#dddddd" stroke-width="1"/>'
            % (_ML, _fmt(py), _W - _MR, _fmt(py))
        )
        out.append(
            '<text x="%d" y="%s" font-size="11" text-anchor="end" fill="#444444">%s</text>'
            % (_ML - 6, _fmt(py + 4), _tick_label(v))
        )

    # axes frame
    out.append(
        '<rect x="%d" y="%d" width="%d" height="%d" fill="none" stroke="#333333" stroke-width="1"/>'
        % (_ML, _MT, _W - _ML - _MR, _H - _MT - _MB)
    )
    if xlabel:
        out.append(
            '<text x="%d" y="%d" font-size="12" text-anchor="middle" fill="#222222">%s</text>'
            % ((_ML + _W - _MR) // 2, _H - 14, _escape(xlabel))
        )
    if ylabel:
        cx, cy = 18, (_MT + _H - _MB) // 2
        out.append(
            '<text x="%d" y="%d" font-size="12" text-anchor="middle" '
            'transform="rotate(-90 %d %d)" fill="#222222">%s</text>'
            % (cx, cy, cx, cy, _escape(ylabel))
        )

    # bands first so lines draw on top
    for idx, s in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        if s.ses is None or len(s.xs) < 2:
            continue
        upper, lower = [], []
        ok = True
        for x, y, se in zip(s.xs, s.ys, s.ses):
            hi = y + 2.0 * se
            lo = y - 2.0 * se
            if lo <= 0:
                lo = min(y, y_lo)  # clip the band at the plotted floor
            if hi <= 0:
                ok = False
                break
            upper.append((fx(x), fy(hi)))
            lower.append((fx(x), fy(max(lo, y_lo))))
        if not ok:
            continue
        pts = upper + lower[::-1]
        out.append(
            '<polygon points="%s" fill="%s" fill-opacity="0.15" stroke="none"/>'
            % (" ".join("%s,%s" % (_fmt(a), _fmt(b)) for a, b in pts), color)
        )

    for idx, s in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join("%s,%s" % (_fmt(fx(x)), _fmt(fy(y))) for x, y in zip(s.xs, s.ys))
        out.append(
            '<polyline points="%s" fill="none" stroke="%s" stroke-width="2"/>' % (pts, color)
        )
        for x, y in zip(s.xs, s.ys):
            out.append(
                '<circle cx="%s" cy="%s" r="2.5" fill="%s"/>' % (_fmt(fx(x)), _fmt(fy(y)), color)
            )

    # legend, top-right inset
    lx, ly = _W - _MR - 170, _MT + 10
    for idx, s in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        yy = ly + 16 * idx
        out.append(
            '<line x1="%d" y1="%d" x2="%d" y2="%d" stroke="%s" stroke-width="2"/>'
            % (lx, yy, lx + 22, yy, color)
        )
        out.append(
            '<text x="%d" y="%d" font-size="11" fill="#222222">%s</text>'
            % (lx + 28, yy + 4, _escape(s.name))
        )

    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def emit_plot(sweep, style: str = "loglog", name: str = "mean", title: str = "",
              xlabel: str = "", ylabel: str = "") -> bytes:
    """Render one SweepResult (means and 2SE band over its axis) to SVG bytes."""
    if style != "loglog":
        raise ValueError("only the loglog style is implemented")
    if len(sweep.values) < 2:
        raise ValueError("need at least 2 points to plot a sweep")
    s = PlotSeries(name=name, xs=list(sweep.values), ys=list(sweep.means), ses=list(sweep.stderrs))
    return render_loglog([s], title=title, xlabel=xlabel or sweep.axis, ylabel=ylabel).encode()
