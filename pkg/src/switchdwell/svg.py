"""Tiny SVG line-plot renderer (axes, ticks, polylines, legend)."""
import math
from xml.sax.saxutils import escape

__all__ = ["line_plot"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    out, v = [], first
    while v <= hi + 1e-12 * step:
        out.append(v)
        v += step
    return out


def line_plot(series, title="", xlabel="", ylabel="", width=640, height=400, logy=False):
    """Render ``series`` (iterable of ``(xs, ys, label)``) as an SVG string.

    With ``logy`` the vertical axis shows ``log10(y)``; non-positive values
    are dropped.
    """
    prepared = []
    for xs, ys, label in series:
        pts = [(float(x), float(y)) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
        if logy:
            pts = [(x, math.log10(y)) for x, y in pts if y > 0]
        if pts:
            prepared.append((pts, label))
    if not prepared:
        raise ValueError("nothing to plot")
    xs = [p[0] for pts, _ in prepared for p in pts]
    ys = [p[1] for pts, _ in prepared for p in pts]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.1f}" y1="{top + ph}" x2="{px(t):.1f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(
            f'<text x="{px(t):.1f}" y="{top + ph + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{t:g}</text>'
        )
    for t in _ticks(y0, y1):
        label = f"1e{t:g}" if logy else f"{t:g}"
        out.append(f'<line x1="{left - 5}" y1="{py(t):.1f}" x2="{left}" y2="{py(t):.1f}" stroke="black"/>')
        out.append(
            f'<text x="{left - 8}" y="{py(t) + 4:.1f}" text-anchor="end" font-family="sans-serif" font-size="11">{label}</text>'
        )
    out.append(
        f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="15" y="{top + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 15 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for k, (pts, label) in enumerate(prepared):
        color = _COLORS[k % len(_COLORS)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        if label:
            out.append(
                f'<text x="{left + pw - 5}" y="{top + 15 + 15 * k}" text-anchor="end" fill="{color}" '
                f'font-family="sans-serif" font-size="12">{escape(label)}</text>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"
