"""Static SVG heatmaps of nodal fields: one coloured polygon per grid cell."""

from __future__ import annotations

import numpy as np

from .grid import Grid

# a few anchor colours of a perceptually ordered dark-to-light ramp
_RAMP = np.array([
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
], dtype=float)

SIZE = 480
MARGIN = 16


def _colour(values, lo, hi):
    span = hi - lo if hi > lo else 1.0
    finite = np.isfinite(values)
    z = np.clip((np.where(finite, values, lo) - lo) / span, 0.0, 1.0) * (len(_RAMP) - 1)
    k = np.minimum(z.astype(int), len(_RAMP) - 2)
    f = (z - k)[:, None]
    rgb = (1.0 - f) * _RAMP[k] + f * _RAMP[k + 1]
    rgb[~finite] = 160.0  # non-finite cells in grey
    return ["#%02x%02x%02x" % tuple(int(round(c)) for c in row) for row in rgb]


def heatmap_svg(grid: Grid, values, title: str = "") -> str:
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    pts = grid.points
    ext = np.abs(pts - grid.domain.center).max() or 1.0
    scale = (SIZE - 2 * MARGIN) / (2.0 * ext)

    def xy(p):
        q = (p - grid.domain.center) * scale
        return SIZE / 2 + q[..., 0], SIZE / 2 - q[..., 1]

    N, M = grid.n_r, grid.n_phi
    polys, cell_vals = [], []
    for i in range(N):
        for j in range(M):
            jn = (j + 1) % M
            if i == 0:
                ids = [0, grid.index(1, j), grid.index(1, jn)]
            else:
                ids = [grid.index(i, j), grid.index(i + 1, j), grid.index(i + 1, jn), grid.index(i, jn)]
            polys.append(ids)
            cell_vals.append(values[ids].sum() / len(ids))
    colours = _colour(np.array(cell_vals), lo, hi)
    X, Y = xy(pts)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE + 24}" '
           f'viewBox="0 0 {SIZE} {SIZE + 24}">',
           '<rect width="100%" height="100%" fill="white"/>']
    for ids, col in zip(polys, colours):
        coords = " ".join(f"{X[k]:.2f},{Y[k]:.2f}" for k in ids)
        out.append(f'<polygon points="{coords}" fill="{col}" stroke="{col}" stroke-width="0.3"/>')
    out.append(f'<text x="{MARGIN}" y="{SIZE + 16}" font-family="sans-serif" font-size="12">'
               f'{title} [{lo:.4g}, {hi:.4g}]</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
