"""Per-pixel surface labels and overlap scoring for layout hypotheses.

Labels tag each panorama pixel with the Manhattan orientation of the surface
the pixel ray hits: 0 walls facing the x axis, 1 walls facing the y axis,
2 horizontal surfaces (ceiling or floor), -1 unknown. Rendering a hypothesis
produces a fully labeled image; a reference image (e.g. from normal-map
classification) may leave pixels unknown, and those never count as matches.
"""

from __future__ import annotations

import numpy as np

from .geometry import _pano_rays, check_equirect_dims
from .hypotheses import LayoutModel

LABEL_X = np.int8(0)
LABEL_Y = np.int8(1)
LABEL_Z = np.int8(2)
LABEL_NONE = np.int8(-1)
LABELS_XYZ = np.array([LABEL_X, LABEL_Y, LABEL_Z], dtype=np.int8)


def points_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd containment test, half-open on edges; pts (...,2), poly (V,2)."""
    x = pts[..., 0]
    y = pts[..., 1]
    inside = np.zeros(x.shape, dtype=bool)
    v = len(poly)
    for i in range(v):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % v]
        if y1 == y2:
            continue
        cond = (y1 > y) != (y2 > y)
        xin = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cond & (x < xin)
    return inside


def render_labels(
    layout: LayoutModel,
    dims: tuple[int, int],
    rot: np.ndarray | None = None,
) -> np.ndarray:
    """Label every panorama pixel with the first surface its ray hits.

    rot maps layout-frame axes into the camera frame (columns = axes), i.e.
    the rotation of the vanishing basis the layout was built in; None means
    the frames coincide. Output is int8 (rows, cols) with no unknown pixels:
    the closed prism covers the full sphere.
    """
    rows, cols = check_equirect_dims(dims)
    rays = _pano_rays((rows, cols))
    if rot is not None:
        rays = rays @ rot  # camera ray -> layout frame
    rx, ry, rz = rays[..., 0], rays[..., 1], rays[..., 2]

    poly = np.asarray(layout.polygon, dtype=float)
    h = float(layout.height)
    best_t = np.full((rows, cols), np.inf)
    labels = np.full((rows, cols), LABEL_NONE, dtype=np.int8)

    def consider(t, hit_mask, label):
        take = hit_mask & (t > 1e-12) & (t < best_t)
        best_t[take] = t[take]
        labels[take] = label

    with np.errstate(divide="ignore", invalid="ignore"):
        # ceiling z = +1 and floor z = -h
        t = 1.0 / rz
        pts = np.stack([rx * t, ry * t], axis=-1)
        consider(t, (rz > 1e-12) & points_in_polygon(pts, poly), LABEL_Z)
        t = -h / rz
        pts = np.stack([rx * t, ry * t], axis=-1)
        consider(t, (rz < -1e-12) & points_in_polygon(pts, poly), LABEL_Z)

        v = len(poly)
        for i in range(v):
            ax, ay = poly[i]
            bx, by = poly[(i + 1) % v]
            if abs(bx - ax) <= abs(by - ay):  # wall plane x = const, faces x
                c = 0.5 * (ax + bx)
                t = c / rx
                ylo, yhi = min(ay, by), max(ay, by)
                hit = (np.abs(rx) > 1e-12) & (ry * t >= ylo) & (ry * t <= yhi)
                label = LABEL_X
            else:  # wall plane y = const, faces y
                c = 0.5 * (ay + by)
                t = c / ry
                xlo, xhi = min(ax, bx), max(ax, bx)
                hit = (np.abs(ry) > 1e-12) & (rx * t >= xlo) & (rx * t <= xhi)
                label = LABEL_Y
            hit &= (rz * t >= -h) & (rz * t <= 1.0)
            consider(t, hit, label)

    if np.any(labels == LABEL_NONE):
        # boundary rays can slip between half-open face tests; patch from the
        # nearest labeled neighbor in the row
        bad = np.where(labels == LABEL_NONE)
        for r, c in zip(*bad):
            row = labels[r]
            good = np.where(row != LABEL_NONE)[0]
            if len(good):
                labels[r, c] = row[good[np.argmin(np.abs(good - c))]]
    return labels


def eop(a: np.ndarray, b: np.ndarray) -> float:
    """Fraction of pixels carrying the same known label in both images."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"label image shapes differ: {a.shape} vs {b.shape}")
    matches = (a == b) & (a != LABEL_NONE)
    return float(np.count_nonzero(matches)) / a.size


def eop_xy_invariant(a: np.ndarray, b: np.ndarray) -> float:
    """EOP up to swapping the X and Y labels of one image.

    Which horizontal Manhattan axis is called "x" is a convention each basis
    estimate fixes arbitrarily; comparisons against an externally labeled
    ground truth must not depend on that coin flip. The vertical label is
    pinned by gravity, so a swap of the other two is the only freedom.
    """
    swapped = a.copy()
    swapped[a == LABEL_X] = LABEL_Y
    swapped[a == LABEL_Y] = LABEL_X
    return max(eop(a, b), eop(swapped, b))


def score_hypotheses(
    layouts: list[LayoutModel],
    reference: np.ndarray,
    rot: np.ndarray | None = None,
) -> np.ndarray:
    dims = reference.shape
    return np.array([eop(render_labels(l, dims, rot), reference) for l in layouts])


def select_best(
    layouts: list[LayoutModel],
    reference: np.ndarray,
    rot: np.ndarray | None = None,
) -> tuple[LayoutModel, float, int]:
    """Highest-EOP hypothesis; ties prefer fewer walls, then earlier index."""
    if not layouts:
        raise ValueError("no hypotheses to select from")
    scores = score_hypotheses(layouts, reference, rot)
    order = sorted(
        range(len(layouts)), key=lambda i: (-scores[i], layouts[i].num_walls, i)
    )
    best = order[0]
    return layouts[best], float(scores[best]), best
