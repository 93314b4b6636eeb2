"""Static grouped-bar SVG charts for benchmark reports.

One chart per (subset, measure): image pairs along the x axis, one bar per
metric within each group.  Plain markup, no scripting, so the files diff
cleanly and render anywhere.
"""

from __future__ import annotations

_PALETTE = ("#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#76b7b2")

_WIDTH = 720
_HEIGHT = 360
_MARGIN_LEFT = 62
_MARGIN_RIGHT = 150
_MARGIN_TOP = 40
_MARGIN_BOTTOM = 44


def _nice_ceiling(value: float) -> float:
    if value <= 0:
        return 1.0
    import math

    mag = 10 ** math.floor(math.log10(value))
    for mult in (1, 2, 2.5, 5, 10):
        if mult * mag >= value:
            return mult * mag
    return 10 * mag


def grouped_bar_svg(
    title: str,
    group_labels: list[str],
    series: list[tuple[str, list[float | None]]],
) -> str:
    """Render groups of bars; None values leave a gap in their group."""
    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM
    values = [v for _, vals in series for v in vals if v is not None]
    top = _nice_ceiling(max(values) if values else 1.0)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}" font-family="sans-serif">',
        f'<text x="{_MARGIN_LEFT}" y="22" font-size="14">{title}</text>',
    ]

    # y axis: 5 gridlines with labels
    for ti in range(6):
        frac = ti / 5
        y = _MARGIN_TOP + plot_h * (1 - frac)
        out.append(
            f'<line x1="{_MARGIN_LEFT}" y1="{y:.1f}" x2="{_MARGIN_LEFT + plot_w}" '
            f'y2="{y:.1f}" stroke="#ddd"/>'
        )
        out.append(
            f'<text x="{_MARGIN_LEFT - 6}" y="{y + 4:.1f}" font-size="10" '
            f'text-anchor="end">{top * frac:g}</text>'
        )

    n_groups = max(len(group_labels), 1)
    n_series = max(len(series), 1)
    group_w = plot_w / n_groups
    bar_w = group_w * 0.8 / n_series
    for gi, label in enumerate(group_labels):
        gx = _MARGIN_LEFT + gi * group_w
        out.append(
            f'<text x="{gx + group_w / 2:.1f}" y="{_MARGIN_TOP + plot_h + 16}" '
            f'font-size="11" text-anchor="middle">{label}</text>'
        )
        for si, (_, vals) in enumerate(series):
            v = vals[gi]
            if v is None:
                continue
            h = plot_h * min(v, top) / top
            x = gx + group_w * 0.1 + si * bar_w
            y = _MARGIN_TOP + plot_h - h
            out.append(
                f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w:.1f}" height="{h:.1f}" '
                f'fill="{_PALETTE[si % len(_PALETTE)]}"/>'
            )

    # legend
    for si, (name, _) in enumerate(series):
        lx = _MARGIN_LEFT + plot_w + 14
        ly = _MARGIN_TOP + 8 + si * 18
        out.append(
            f'<rect x="{lx}" y="{ly - 9}" width="12" height="12" '
            f'fill="{_PALETTE[si % len(_PALETTE)]}"/>'
        )
        out.append(f'<text x="{lx + 17}" y="{ly + 2}" font-size="11">{name}</text>')

    out.append("</svg>")
    return "\n".join(out) + "\n"
