"""Deterministic rasterization of widget trees into RGBA screenshots.

Colors come from an explicit integer mix of the widget id, not Python's
hash(): renders must be byte-identical across runs, platforms, and
PYTHONHASHSEED values. Children paint over parents; everything is clipped to
the window's own rectangle.
"""

from __future__ import annotations

import numpy as np

from .model import Screenshot

_MASK64 = (1 << 64) - 1


def widget_color(widget_id: int) -> tuple[int, int, int, int]:
    # SplitMix64 finalizer over a golden-ratio stride; adjacent ids land far apart
    z = (widget_id * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return (z & 0xFF, (z >> 8) & 0xFF, (z >> 16) & 0xFF, 0xFF)


def render_screenshot(window) -> Screenshot | None:
    """Rasterize the window's subtree; None when the window is not visible.

    The viewport is the window's own geometry; child coordinates are absolute,
    so they are shifted by the window origin and clipped. Invisible subtrees
    are skipped entirely.
    """
    if not window.visible:
        return None
    g = window.geometry
    if g.width < 1 or g.height < 1:
        raise ValueError(f"cannot rasterize degenerate geometry {g.width}x{g.height}")
    buf = np.zeros((g.height, g.width, 4), dtype=np.uint8)
    _paint(buf, window, g.x, g.y)
    return Screenshot(width=g.width, height=g.height, pixels=buf.tobytes())


def _paint(buf, widget, origin_x, origin_y):
    if not widget.visible:
        return
    g = widget.geometry
    x0 = max(g.x - origin_x, 0)
    y0 = max(g.y - origin_y, 0)
    x1 = min(g.x - origin_x + g.width, buf.shape[1])
    y1 = min(g.y - origin_y + g.height, buf.shape[0])
    if x1 > x0 and y1 > y0:
        buf[y0:y1, x0:x1] = widget_color(widget.widget_id)
    for child in widget.children:
        _paint(buf, child, origin_x, origin_y)
