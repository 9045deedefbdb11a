"""Built-in synthetic map: a river with tributaries and a riverside town grid."""

from __future__ import annotations

import math

BUILTIN_NAME = "builtin:river_town"


def _fmt(x: float) -> str:
    return f"{round(x, 3):g}"


def river_town_map(
    river_length: float = 6000.0,
    river_step: float = 250.0,
    town_cols: int = 8,
    town_rows: int = 7,
    block: float = 50.0,
) -> str:
    """Map text for a meandering river, three tributaries and a town grid.

    River and tributary edges are tagged ``water``, streets ``land`` and the
    two jetties joining town and river ``both``, so motorboats and bicycles
    only share the jetties and the river vertices they end on.
    """
    lines = ["# synthetic river + town scenario map (metres)"]

    xs = [i * river_step for i in range(int(river_length // river_step) + 1)]
    river = [(x, 60.0 * math.sin(x / 700.0)) for x in xs]
    lines.append("LINE:water " + " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in river))

    # tributaries branch off every few river vertices, alternating banks
    for n, (k, direction) in enumerate(((4, -1), (12, 1), (20, -1))):
        bx, by = river[k]
        pts = [(bx, by)]
        for j in range(1, 7):
            pts.append((bx + 40.0 * math.sin(j + n), by + direction * 220.0 * j))
        lines.append("LINE:water " + " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts))

    # town grid on the north bank, centred on the middle of the river
    mid = len(river) // 2
    x0 = river[mid][0] - block * (town_cols - 1) / 2
    y0 = max(y for _, y in river) + 80.0
    for r in range(town_rows):
        y = y0 + r * block
        lines.append("LINE:land " + " ".join(f"{_fmt(x0 + c * block)},{_fmt(y)}" for c in range(town_cols)))
    for c in range(town_cols):
        x = x0 + c * block
        lines.append("LINE:land " + " ".join(f"{_fmt(x)},{_fmt(y0 + r * block)}" for r in range(town_rows)))

    # jetties: town's south-west and south-east corners down to river vertices
    for corner_col, river_k in ((0, mid - 1), (town_cols - 1, mid + 1)):
        rx, ry = river[river_k]
        cx = x0 + corner_col * block
        lines.append(f"LINE:both {_fmt(cx)},{_fmt(y0)} {_fmt(rx)},{_fmt(ry)}")

    return "\n".join(lines) + "\n"
