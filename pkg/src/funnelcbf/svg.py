"""Minimal SVG plots: funnel tube in the output plane and input traces over time."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#c0392b", "#2c6fbb", "#222222", "#27ae60", "#8e44ad")
WIDTH, PANEL_H, MARGIN = 640, 320, 48
MAX_POINTS = 1500


class _Axes:
    def __init__(self, x0, y0, w, h, xlim, ylim, equal=False):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        (xa, xb), (ya, yb) = xlim, ylim
        if xb <= xa:
            xa, xb = xa - 1, xb + 1
        if yb <= ya:
            ya, yb = ya - 1, yb + 1
        if equal:
            # same data-per-pixel on both axes so circles stay circles
            scale = max((xb - xa) / w, (yb - ya) / h)
            cx, cy = 0.5 * (xa + xb), 0.5 * (ya + yb)
            xa, xb = cx - 0.5 * scale * w, cx + 0.5 * scale * w
            ya, yb = cy - 0.5 * scale * h, cy + 0.5 * scale * h
        self.xlim, self.ylim = (xa, xb), (ya, yb)

    def px(self, x):
        xa, xb = self.xlim
        return self.x0 + (np.asarray(x) - xa) / (xb - xa) * self.w

    def py(self, y):
        ya, yb = self.ylim
        return self.y0 + self.h - (np.asarray(y) - ya) / (yb - ya) * self.h

    def radius(self, r):
        return r / (self.xlim[1] - self.xlim[0]) * self.w

    def polyline(self, xs, ys, color, dash=None, width=1.5):
        stride = max(1, len(xs) // MAX_POINTS)
        xs = np.concatenate([np.asarray(xs)[::stride], np.asarray(xs)[-1:]])
        ys = np.concatenate([np.asarray(ys)[::stride], np.asarray(ys)[-1:]])
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(self.px(xs), self.py(ys)))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        return f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{dash_attr} points="{pts}"/>'

    def frame(self, title, xlabel, ylabel):
        (xa, xb), (ya, yb) = self.xlim, self.ylim
        parts = [
            f'<rect x="{self.x0}" y="{self.y0}" width="{self.w}" height="{self.h}" fill="none" stroke="#888"/>',
            f'<text x="{self.x0 + self.w / 2:.1f}" y="{self.y0 - 8}" text-anchor="middle" font-size="13">{escape(title)}</text>',
            f'<text x="{self.x0 + self.w / 2:.1f}" y="{self.y0 + self.h + 30}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>',
            f'<text x="{self.x0 - 34}" y="{self.y0 + self.h / 2:.1f}" text-anchor="middle" font-size="11" '
            f'transform="rotate(-90 {self.x0 - 34} {self.y0 + self.h / 2:.1f})">{escape(ylabel)}</text>',
        ]
        for frac in (0.0, 0.5, 1.0):
            xv, yv = xa + frac * (xb - xa), ya + frac * (yb - ya)
            parts.append(f'<text x="{self.px(xv):.1f}" y="{self.y0 + self.h + 14}" text-anchor="middle" font-size="9">{xv:.3g}</text>')
            parts.append(f'<text x="{self.x0 - 4}" y="{self.py(yv):.1f}" text-anchor="end" font-size="9">{yv:.3g}</text>')
        return parts


def trajectory_svg(runs, boundary, reference, u_ref=None, title="", tube_every=0.25) -> str:
    """Render one or more runs.

    ``runs`` is a list of ``(label, trajectory)``; the first two output
    coordinates are drawn in the plane together with the funnel circles.
    """
    times = runs[0][1].times
    t_tube = np.arange(times[0], times[-1] + 1e-12, tube_every)
    centers = np.array([reference.y_r(t)[:2] for t in t_tube])
    radii = np.array([boundary.psi(t) for t in t_tube])
    ref_path = np.array([reference.y_r(t)[:2] for t in times])
    all_xy = np.vstack([ref_path] + [tr.outputs[:, :2] for _, tr in runs])
    lo = np.minimum(all_xy.min(axis=0), (centers - radii[:, None]).min(axis=0))
    hi = np.maximum(all_xy.max(axis=0), (centers + radii[:, None]).max(axis=0))
    top = _Axes(MARGIN, MARGIN, WIDTH - 2 * MARGIN, PANEL_H - MARGIN, (lo[0], hi[0]), (lo[1], hi[1]), equal=True)

    body = top.frame(title or "output plane", "y1", "y2")
    for (cx, cy), r in zip(centers, radii):
        body.append(
            f'<circle cx="{float(top.px(cx)):.2f}" cy="{float(top.py(cy)):.2f}" r="{top.radius(r):.2f}" '
            f'fill="none" stroke="#2c6fbb" stroke-opacity="0.5"/>'
        )
    body.append(top.polyline(ref_path[:, 0], ref_path[:, 1], "#2c6fbb", dash="2,3"))
    dashes = (None, "6,4", "2,2")
    for i, (_, tr) in enumerate(runs):
        body.append(top.polyline(tr.outputs[:, 0], tr.outputs[:, 1], "#c0392b", dash=dashes[i % 3]))

    inputs = [tr.inputs for _, tr in runs]
    u_refs = np.array([u_ref(t) for t in times]) if u_ref is not None else None
    stack = np.vstack(inputs + ([u_refs] if u_refs is not None else []))
    span = np.percentile(np.abs(stack), 99.5) if stack.size else 1.0
    bottom = _Axes(MARGIN, PANEL_H + MARGIN + 20, WIDTH - 2 * MARGIN, PANEL_H - MARGIN, (times[0], times[-1]), (-span, span))
    body += bottom.frame("inputs", "t", "u")
    for i, (_, tr) in enumerate(runs):
        for j in range(tr.inputs.shape[1]):
            body.append(bottom.polyline(tr.times, np.clip(tr.inputs[:, j], -span, span), COLORS[j % len(COLORS)], dash=dashes[i % 3], width=1.0))
    if u_refs is not None:
        for j in range(u_refs.shape[1]):
            body.append(bottom.polyline(times, u_refs[:, j], COLORS[j % len(COLORS)], dash="1,3", width=1.0))

    legend_y = 2 * PANEL_H + 2 * MARGIN
    labels = ", ".join(f"{lab} ({'solid' if i == 0 else 'dashed' if i == 1 else 'dotted'})" for i, (lab, _) in enumerate(runs))
    body.append(f'<text x="{MARGIN}" y="{legend_y}" font-size="11">{escape(labels)}; funnel circles in blue</text>')
    height = legend_y + 16
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )
