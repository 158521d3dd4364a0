"""Corner candidates from pairwise structural-line intersections.

Two lines parallel to different Manhattan axes intersect (on the sphere) in
an antipodal direction pair; the sign pointing at an actual room corner is
the one near the ends of both segments. Candidates carry hemisphere and
quadrant labels in the vanishing-basis frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import arc_span, unit
from .lines import GreatCircleSegment, VanishingBasis

HEMISPHERES = ("ceiling", "floor")
QUADRANTS = ("q1", "q2", "q3", "q4")

DEFAULT_GAP_TOL_DEG = 10.0   # how far past a segment end an intersection may sit
DEFAULT_CROSS_TOL_DEG = 1.0  # how far inside a segment it may sit (fit overshoot)
DEFAULT_MERGE_DEG = 1.0


class ClassificationError(ValueError):
    """Direction lies on the horizon or a quadrant divider."""


@dataclass(frozen=True)
class CornerCandidate:
    dir: np.ndarray
    hemisphere: str
    quadrant: str
    parents: tuple[int, int]
    weight: int = 1  # summed parent inlier support, used by dedup and sampling


def classify_corner(direction: np.ndarray, basis: VanishingBasis) -> tuple[str, str]:
    """Hemisphere by sign(z), quadrant by (sign x, sign y), in the basis frame."""
    d = basis.rot.T @ unit(np.asarray(direction, dtype=float))
    x, y, z = d
    if abs(z) < 1e-9:
        raise ClassificationError("direction on the horizon")
    if abs(x) < 1e-9 or abs(y) < 1e-9:
        raise ClassificationError("direction on a quadrant divider")
    hemisphere = "ceiling" if z > 0 else "floor"
    if x > 0:
        quadrant = "q1" if y > 0 else "q4"
    else:
        quadrant = "q2" if y > 0 else "q3"
    return hemisphere, quadrant


def _near_arc_end(
    seg: GreatCircleSegment, point: np.ndarray, gap_tol: float, cross_tol: float
) -> bool:
    """True when `point` (on the segment's circle) sits near either arc end.

    Position is the CCW angle from d1; allowed is within gap_tol beyond an
    endpoint or cross_tol inside of it. Points deeper inside the arc are
    crossings, not corners.
    """
    span = seg.span
    pos = arc_span(seg.normal, seg.d1, point)  # in [0, 2*pi)
    near_d1 = pos <= cross_tol or pos >= 2.0 * np.pi - gap_tol
    near_d2 = span - cross_tol <= pos <= span + gap_tol
    return bool(near_d1 or near_d2)


def intersect_lines(
    a: GreatCircleSegment,
    b: GreatCircleSegment,
    basis: VanishingBasis,
    parents: tuple[int, int] = (0, 1),
    gap_tol_deg: float = DEFAULT_GAP_TOL_DEG,
    cross_tol_deg: float = DEFAULT_CROSS_TOL_DEG,
) -> CornerCandidate | None:
    """Corner candidate where two different-axis segments meet, or None.

    Tries both signs of normalize(n_a x n_b); a sign qualifies when it lies
    near an endpoint of both segments (within gap_tol past the end, cross_tol
    inside it). Degenerate (near-parallel) pairs and dividers yield None.
    """
    if a.axis is None or b.axis is None or a.axis == b.axis:
        raise ValueError("need two classified segments with different axes")
    cross = np.cross(a.normal, b.normal)
    norm = np.linalg.norm(cross)
    if norm < 1e-6:
        return None
    gap = np.radians(gap_tol_deg)
    tol = np.radians(cross_tol_deg)
    for sign in (1.0, -1.0):
        cand = sign * cross / norm
        if _near_arc_end(a, cand, gap, tol) and _near_arc_end(b, cand, gap, tol):
            try:
                hemisphere, quadrant = classify_corner(cand, basis)
            except ClassificationError:
                return None
            return CornerCandidate(
                dir=cand,
                hemisphere=hemisphere,
                quadrant=quadrant,
                parents=parents,
                weight=a.inlier_count + b.inlier_count,
            )
    return None


def dedup_candidates(
    cands: list[CornerCandidate],
    basis: VanishingBasis,
    merge_deg: float = DEFAULT_MERGE_DEG,
) -> list[CornerCandidate]:
    """Merge candidates within merge_deg of each other.

    The cluster direction is the weight-averaged mean, then snapped to the
    exact intersection of the member nearest that mean so the parent-plane
    identity |dir . n_parent| = 0 keeps holding. Runs to a fixed point, so
    the operation is idempotent.
    """
    while True:
        out = _dedup_pass(cands, basis, merge_deg)
        if len(out) == len(cands):
            return out
        cands = out


def _dedup_pass(
    cands: list[CornerCandidate], basis: VanishingBasis, merge_deg: float
) -> list[CornerCandidate]:
    out: list[CornerCandidate] = []
    used = np.zeros(len(cands), dtype=bool)
    cos_merge = np.cos(np.radians(merge_deg))
    dirs = np.stack([c.dir for c in cands]) if cands else np.zeros((0, 3))
    for i in range(len(cands)):
        if used[i]:
            continue
        members = [j for j in range(len(cands)) if not used[j] and dirs[j] @ dirs[i] >= cos_merge]
        for j in members:
            used[j] = True
        weights = np.array([cands[j].weight for j in members], dtype=float)
        mean = unit((weights[:, None] * dirs[members]).sum(axis=0))
        rep_j = members[int(np.argmax(dirs[members] @ mean))]
        rep = cands[rep_j]
        try:
            hemisphere, quadrant = classify_corner(rep.dir, basis)
        except ClassificationError:
            continue
        out.append(
            CornerCandidate(
                dir=rep.dir,
                hemisphere=hemisphere,
                quadrant=quadrant,
                parents=rep.parents,
                weight=int(weights.sum()),
            )
        )
    return out


def extract_corner_candidates(
    lines: list[GreatCircleSegment],
    basis: VanishingBasis,
    gap_tol_deg: float = DEFAULT_GAP_TOL_DEG,
    cross_tol_deg: float = DEFAULT_CROSS_TOL_DEG,
    merge_deg: float = DEFAULT_MERGE_DEG,
) -> list[CornerCandidate]:
    """All qualifying pairwise intersections across different-axis lines, deduped."""
    raw: list[CornerCandidate] = []
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            if lines[i].axis is None or lines[j].axis is None:
                continue
            if lines[i].axis == lines[j].axis:
                continue
            cand = intersect_lines(
                lines[i], lines[j], basis, (i, j), gap_tol_deg, cross_tol_deg
            )
            if cand is not None:
                raw.append(cand)
    return dedup_candidates(raw, basis, merge_deg)
