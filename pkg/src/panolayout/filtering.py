"""Fusing neural maps with geometric lines.

Edge-probability maps gate which detected lines count as structural; normal
maps are reduced to per-pixel orientation labels against the vanishing basis.
Both maps are plain rasters loaded from files; nothing here knows about
networks.
"""

from __future__ import annotations

import numpy as np

from .evaluation import LABEL_NONE, LABELS_XYZ
from .geometry import arc_pixels
from .lines import GreatCircleSegment, VanishingBasis

DEFAULT_TAU = 0.2
DEFAULT_SCORE_FRACTION = 0.10
DEFAULT_NORMAL_TOL_DEG = 30.0


def threshold_probability(prob: np.ndarray, tau: float = DEFAULT_TAU) -> np.ndarray:
    """Zero out probabilities below tau; idempotent."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    prob = np.asarray(prob, dtype=float)
    if prob.min() < 0.0 or prob.max() > 1.0:
        raise ValueError("probability map values must lie in [0, 1]")
    return np.where(prob < tau, 0.0, prob)


def score_line(line: GreatCircleSegment, prob: np.ndarray) -> tuple[float, int]:
    """Sum of map values over the pixels the arc occupies.

    Returns (score, pixel count of the rasterized arc). Wraps the azimuth
    seam like every other arc walk.
    """
    if line.span <= 0.0:
        return 0.0, 0
    pix = arc_pixels(line.normal, line.d1, line.d2, prob.shape[:2])
    return float(prob[pix[:, 0], pix[:, 1]].sum()), len(pix)


def filter_structural_lines(
    lines: list[GreatCircleSegment],
    prob: np.ndarray,
    fraction: float = DEFAULT_SCORE_FRACTION,
) -> list[GreatCircleSegment]:
    """Keep lines whose edge-map score reaches `fraction` of their pixel length."""
    kept = []
    for line in lines:
        score, _ = score_line(line, prob)
        if score >= fraction * line.pixel_length:
            kept.append(line)
    return kept


def label_normals(
    normal_map: np.ndarray,
    basis: VanishingBasis,
    angle_tol_deg: float = DEFAULT_NORMAL_TOL_DEG,
) -> np.ndarray:
    """Per-pixel orientation labels from a world-frame normal map.

    A pixel gets the axis whose +-vp_k direction is nearest its normal, when
    that angle is within angle_tol; nil normals and far-from-axis normals
    become LABEL_NONE. Sign-insensitive by construction.
    """
    nm = np.asarray(normal_map, dtype=float)
    if nm.ndim != 3 or nm.shape[2] != 3:
        raise ValueError("normal map must be (M, N, 3)")
    norms = np.linalg.norm(nm, axis=-1)
    valid = norms > 0.5
    cos_axes = np.abs(nm @ basis.rot)  # |n . vp_k| per axis
    with np.errstate(invalid="ignore"):
        cos_axes = cos_axes / np.maximum(norms[..., None], 1e-30)
    best = np.argmax(cos_axes, axis=-1)
    best_cos = np.take_along_axis(cos_axes, best[..., None], axis=-1)[..., 0]
    min_cos = np.cos(np.radians(angle_tol_deg))
    out = np.full(nm.shape[:2], LABEL_NONE, dtype=np.int8)
    hit = valid & (best_cos >= min_cos)
    out[hit] = LABELS_XYZ[best[hit]]
    return out
