"""Shared test fixtures: candidate lists from synthetic scenes, random rotations."""

import numpy as np

from panolayout.corners import ClassificationError, CornerCandidate, classify_corner
from panolayout.geometry import unit


def jitter(d, deg, rng):
    axis = unit(rng.normal(size=3))
    ang = np.radians(deg) * rng.normal()
    return unit(
        d * np.cos(ang)
        + np.cross(axis, d) * np.sin(ang)
        + axis * (axis @ d) * (1 - np.cos(ang))
    )


def scene_corner_candidates(scene, noise_deg=0.0, rng=None):
    """Corner candidates straight from a scene's true corner rays."""
    cands = []
    for i, d in enumerate(scene.corner_dirs):
        d = unit(np.asarray(d, float))
        if noise_deg > 0.0:
            d = jitter(d, noise_deg, rng)
        try:
            hemisphere, quadrant = classify_corner(d, scene.basis)
        except ClassificationError:
            continue
        cands.append(
            CornerCandidate(
                dir=d, hemisphere=hemisphere, quadrant=quadrant, parents=(i, i), weight=10
            )
        )
    return cands


def random_rotation(rng):
    q = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
