"""Minimal standalone SVG writer for time series and feasibility maps."""

from html import escape

import numpy as np

WIDTH, HEIGHT = 720, 360
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
MAX_POINTS = 3000


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** np.floor(np.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(start, hi + 0.5 * step, step)]


def _thin(t, y):
    if t.size <= MAX_POINTS:
        return t, y
    idx = np.linspace(0, t.size - 1, MAX_POINTS).round().astype(int)
    return t[idx], y[idx]


def line_plot(series, title="", xlabel="t [s]", ylabel="", hlines=()):
    """``series``: iterable of (t, y, label); ``hlines``: iterable of (value, label).

    Horizontal lines are drawn dashed, as constraint bounds.
    """
    series = [(np.asarray(t, float), np.asarray(y, float), lab) for t, y, lab in series]
    finite = [y[np.isfinite(y)] for _, y, _ in series]
    ymax = max([float(v.max()) for v in finite if v.size] + [h for h, _ in hlines] + [0.0])
    ymin = min([float(v.min()) for v in finite if v.size] + [0.0])
    ymax = ymax * 1.08 if ymax > 0 else 1.0
    tmin = min(float(t[0]) for t, _, _ in series)
    tmax = max(float(t[-1]) for t, _, _ in series)
    if tmax <= tmin:
        tmax = tmin + 1.0
    pw = WIDTH - LEFT - RIGHT
    ph = HEIGHT - TOP - BOTTOM

    def X(t):
        return LEFT + (t - tmin) / (tmax - tmin) * pw

    def Y(v):
        return TOP + ph - (v - ymin) / (ymax - ymin) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">'
        f"{escape(title)}</text>",
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(ymin, ymax):
        out.append(f'<line x1="{LEFT - 4}" y1="{Y(v):.2f}" x2="{LEFT}" y2="{Y(v):.2f}" '
                   'stroke="black"/>')
        out.append(f'<text x="{LEFT - 7}" y="{Y(v) + 4:.2f}" text-anchor="end">{v:g}</text>')
    for v in _ticks(tmin, tmax):
        out.append(f'<line x1="{X(v):.2f}" y1="{TOP + ph}" x2="{X(v):.2f}" y2="{TOP + ph + 4}" '
                   'stroke="black"/>')
        out.append(f'<text x="{X(v):.2f}" y="{TOP + ph + 18}" text-anchor="middle">{v:g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">'
               f"{escape(xlabel)}</text>")
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(ylabel)}</text>')
    for value, label in hlines:
        out.append(f'<line x1="{LEFT}" y1="{Y(value):.2f}" x2="{LEFT + pw}" y2="{Y(value):.2f}" '
                   'stroke="black" stroke-dasharray="6,4"/>')
        out.append(f'<text x="{LEFT + pw - 4}" y="{Y(value) - 4:.2f}" text-anchor="end">'
                   f"{escape(label)}</text>")
    for k, (t, y, label) in enumerate(series):
        t, y = _thin(t, y)
        ok = np.isfinite(y)
        pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(t[ok], y[ok]))
        color = PALETTE[k % len(PALETTE)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.4" points="{pts}"/>')
        ly = TOP + 16 + 16 * k
        out.append(f'<line x1="{LEFT + 10}" y1="{ly - 4}" x2="{LEFT + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + 35}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def feasibility_heatmap(fmap, title="Feasibility region"):
    x0, x1 = fmap.values0, fmap.values1
    pw = WIDTH - LEFT - RIGHT
    ph = HEIGHT - TOP - BOTTOM
    nx, ny = x0.size, x1.size
    cw, ch = pw / nx, ph / ny
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">'
        f"{escape(title)}</text>",
    ]
    for j in range(ny):
        for i in range(nx):
            color = "#7fc97f" if fmap.cells[j, i] else "#f0f0f0"
            out.append(f'<rect x="{LEFT + i * cw:.2f}" y="{TOP + ph - (j + 1) * ch:.2f}" '
                       f'width="{cw + 0.05:.2f}" height="{ch + 0.05:.2f}" fill="{color}"/>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" '
               'stroke="black"/>')
    for i in np.unique(np.linspace(0, nx - 1, min(nx, 6)).round().astype(int)):
        xc = LEFT + (i + 0.5) * cw
        out.append(f'<text x="{xc:.2f}" y="{TOP + ph + 18}" text-anchor="middle">'
                   f"{x0[i]:.3g}</text>")
    for j in np.unique(np.linspace(0, ny - 1, min(ny, 6)).round().astype(int)):
        yc = TOP + ph - (j + 0.5) * ch
        out.append(f'<text x="{LEFT - 7}" y="{yc + 4:.2f}" text-anchor="end">{x1[j]:.3g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">'
               f"{escape(fmap.axes[0])}</text>")
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(fmap.axes[1])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
