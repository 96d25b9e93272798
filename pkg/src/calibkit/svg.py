"""Hand-emitted SVG plots: reliability diagrams and PR curves.

No plotting dependency; every element is written as a literal SVG tag so
the geometry is testable by parsing coordinates.  Both plots use a fixed
800x600 viewBox with these documented transforms (coordinates are written
with two decimals):

Reliability diagram
    plot area: x in [70, 770], y in [30, 450]
    data (x, y) in the unit square maps to
        px = 70 + 700 * x
        py = 450 - 420 * y
    non-empty bins are drawn as ``circle class="bin-marker"`` at
    (px(mean_score), py(observed)); a lower strip (y in [470, 560]) holds
    the bin-count histogram, bar heights scaled to the fullest bin.

PR curve
    plot area: x in [70, 770], y in [30, 530]
    (recall, precision) maps to
        px = 70 + 700 * recall
        py = 530 - 500 * precision
    the curve is step-plotted (precision over (R[i-1], R[i]] is P[i], the
    same convention the AUPRC sum uses), the chosen threshold's point is a
    ``circle class="chosen-threshold"``, and AUPRC plus the threshold are
    printed as text to four decimals.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from .metrics import PRCurve, ReliabilityBins, ThresholdChoice

_WIDTH = 800
_HEIGHT = 600

_PLOT_LEFT = 70.0
_PLOT_RIGHT = 770.0
_PLOT_SPAN = _PLOT_RIGHT - _PLOT_LEFT

_REL_TOP = 30.0
_REL_BOTTOM = 450.0
_REL_STRIP_TOP = 470.0
_REL_STRIP_BOTTOM = 560.0

_PR_TOP = 30.0
_PR_BOTTOM = 530.0

_AXIS = 'stroke="#222222" stroke-width="1"'
_TICKS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _write(path, parts: list[str]) -> None:
    body = "\n".join(parts) + "\n"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(body)


def _header(title: str | None) -> list[str]:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        '<g font-family="sans-serif" font-size="14" fill="#222222">',
    ]
    if title:
        parts.append(f'<text x="420" y="20" text-anchor="middle" '
                     f'font-size="16">{escape(title)}</text>')
    return parts


def _axes(parts: list[str], bottom: float, top: float,
          x_label: str, y_label: str, label_y: float) -> None:
    parts.append(f'<line x1="{_fmt(_PLOT_LEFT)}" y1="{_fmt(bottom)}" '
                 f'x2="{_fmt(_PLOT_RIGHT)}" y2="{_fmt(bottom)}" {_AXIS}/>')
    parts.append(f'<line x1="{_fmt(_PLOT_LEFT)}" y1="{_fmt(top)}" '
                 f'x2="{_fmt(_PLOT_LEFT)}" y2="{_fmt(bottom)}" {_AXIS}/>')
    span_y = bottom - top
    for t in _TICKS:
        x = _PLOT_LEFT + _PLOT_SPAN * t
        y = bottom - span_y * t
        parts.append(f'<line x1="{_fmt(x)}" y1="{_fmt(bottom)}" '
                     f'x2="{_fmt(x)}" y2="{_fmt(bottom + 5)}" {_AXIS}/>')
        parts.append(f'<text x="{_fmt(x)}" y="{_fmt(bottom + 22)}" '
                     f'text-anchor="middle">{t:.1f}</text>')
        parts.append(f'<line x1="{_fmt(_PLOT_LEFT - 5)}" y1="{_fmt(y)}" '
                     f'x2="{_fmt(_PLOT_LEFT)}" y2="{_fmt(y)}" {_AXIS}/>')
        parts.append(f'<text x="{_fmt(_PLOT_LEFT - 10)}" y="{_fmt(y + 5)}" '
                     f'text-anchor="end">{t:.1f}</text>')
    mid_x = (_PLOT_LEFT + _PLOT_RIGHT) / 2.0
    parts.append(f'<text x="{_fmt(mid_x)}" y="{_fmt(label_y)}" '
                 f'text-anchor="middle">{escape(x_label)}</text>')
    mid_y = (top + bottom) / 2.0
    parts.append(f'<text x="20" y="{_fmt(mid_y)}" text-anchor="middle" '
                 f'transform="rotate(-90 20 {_fmt(mid_y)})">'
                 f'{escape(y_label)}</text>')


def emit_reliability_svg(b: ReliabilityBins, path,
                         title: str | None = None) -> None:
    """Write a reliability diagram; empty bins draw no marker or bar."""
    parts = _header(title)
    _axes(parts, _REL_BOTTOM, _REL_TOP,
          "Mean predicted probability", "Observed positive fraction",
          label_y=592.0)
    parts.append(
        f'<line x1="{_fmt(_PLOT_LEFT)}" y1="{_fmt(_REL_BOTTOM)}" '
        f'x2="{_fmt(_PLOT_RIGHT)}" y2="{_fmt(_REL_TOP)}" '
        f'stroke="#999999" stroke-width="1" stroke-dasharray="6 4"/>')

    max_count = max((rb.count for rb in b.bins), default=0)
    strip_height = _REL_STRIP_BOTTOM - _REL_STRIP_TOP
    parts.append(f'<line x1="{_fmt(_PLOT_LEFT)}" '
                 f'y1="{_fmt(_REL_STRIP_BOTTOM)}" x2="{_fmt(_PLOT_RIGHT)}" '
                 f'y2="{_fmt(_REL_STRIP_BOTTOM)}" {_AXIS}/>')
    for rb in b.bins:
        if rb.count == 0:
            continue
        x_left = _PLOT_LEFT + _PLOT_SPAN * rb.lower
        x_right = _PLOT_LEFT + _PLOT_SPAN * rb.upper
        height = strip_height * (rb.count / max_count)
        parts.append(
            f'<rect x="{_fmt(x_left + 1)}" '
            f'y="{_fmt(_REL_STRIP_BOTTOM - height)}" '
            f'width="{_fmt(x_right - x_left - 2)}" height="{_fmt(height)}" '
            f'fill="#c6dbef" stroke="#1f77b4" stroke-width="0.5"/>')
    for rb in b.bins:
        if rb.count == 0:
            continue
        cx = _PLOT_LEFT + _PLOT_SPAN * rb.mean_score
        cy = _REL_BOTTOM - (_REL_BOTTOM - _REL_TOP) * rb.observed
        parts.append(f'<circle class="bin-marker" cx="{_fmt(cx)}" '
                     f'cy="{_fmt(cy)}" r="4" fill="#1f77b4"/>')
    parts.append("</g>")
    parts.append("</svg>")
    _write(path, parts)


def emit_pr_svg(c: PRCurve, choice: ThresholdChoice, path,
                title: str | None = None) -> None:
    """Write a step-plotted PR curve with the chosen threshold marked."""
    parts = _header(title)
    _axes(parts, _PR_BOTTOM, _PR_TOP, "Recall", "Precision", label_y=585.0)

    def px(recall: float) -> float:
        return _PLOT_LEFT + _PLOT_SPAN * recall

    def py(precision: float) -> float:
        return _PR_BOTTOM - (_PR_BOTTOM - _PR_TOP) * precision

    points = c.points
    first = points[0]
    d = [f"M {_fmt(px(0.0))} {_fmt(py(first.precision))}",
         f"H {_fmt(px(first.recall))}"]
    for pt in points[1:]:
        d.append(f"V {_fmt(py(pt.precision))}")
        d.append(f"H {_fmt(px(pt.recall))}")
    parts.append(f'<path d="{" ".join(d)}" fill="none" stroke="#1f77b4" '
                 f'stroke-width="2"/>')

    # Operating at threshold t means predicting positive for scores >= t,
    # which lands on the curve point with the smallest threshold >= t
    # (points are in descending-threshold order).  t above every threshold
    # predicts nothing positive and has no curve point to mark.
    chosen = None
    for pt in points:
        if pt.threshold >= choice.threshold:
            chosen = pt
        else:
            break
    if chosen is not None:
        parts.append(f'<circle class="chosen-threshold" '
                     f'cx="{_fmt(px(chosen.recall))}" '
                     f'cy="{_fmt(py(chosen.precision))}" r="5" '
                     f'fill="#d62728"/>')

    parts.append(f'<text x="90" y="60">AUPRC = {c.auprc:.4f}</text>')
    parts.append(f'<text x="90" y="80">threshold = {choice.threshold:.4f} '
                 f'({escape(choice.criterion)})</text>')
    parts.append("</g>")
    parts.append("</svg>")
    _write(path, parts)


__all__ = ["emit_reliability_svg", "emit_pr_svg"]
