"""Line detection on the sphere.

Edges from the panorama are grouped into connected components; each group is
fitted with a great circle (a world line seen from the camera lies on one),
represented by the unit normal of its projective plane. Vanishing directions
come from a second RANSAC over pairs of those normals.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import cv2
import numpy as np
from scipy import ndimage

from .geometry import arc_span, check_equirect_dims, pixel_to_ray, unit

AXES = ("X", "Y", "Z")


class EstimationError(RuntimeError):
    """Vanishing basis could not be recovered from the line set."""


@dataclass(frozen=True)
class ThresholdConfig:
    """Knobs for edge detection, circle fitting and VP estimation."""

    theta_th_deg: float = 0.5        # line/VP inlier angle
    canny_sigma: float = 1.0
    canny_low_frac: float = 0.1      # of max gradient magnitude
    canny_high_frac: float = 0.2
    min_group_size: int = 30         # at width 1024, scaled with actual width
    ransac_confidence: float = 0.999
    ransac_max_iters: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.theta_th_deg <= 0:
            raise ValueError("theta_th must be positive")

    @property
    def sin_theta(self) -> float:
        return float(np.sin(np.radians(self.theta_th_deg)))


@dataclass(frozen=True)
class EdgeGroup:
    """One connected edge component: pixel coords (k,2) and their unit rays (k,3)."""

    pixels: np.ndarray
    rays: np.ndarray

    def __len__(self) -> int:
        return len(self.pixels)


@dataclass(frozen=True)
class GreatCircleSegment:
    """A detected line: plane normal + arc endpoints on the unit sphere.

    The arc runs counterclockwise about `normal` from d1 to d2 (see
    geometry.arc_span). axis is one of "X"/"Y"/"Z" once classified, else None.
    """

    normal: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    inlier_count: int
    pixel_length: int
    axis: str | None = None

    @property
    def span(self) -> float:
        return arc_span(self.normal, self.d1, self.d2)


@dataclass(frozen=True)
class VanishingBasis:
    """Right-handed orthonormal triple; columns of rot are vp_x, vp_y, vp_z.

    vp_z is the gravity axis: the column with the largest |z| component,
    flipped so its z is >= 0.
    """

    rot: np.ndarray
    inliers: tuple[int, int, int]

    @property
    def vp_x(self) -> np.ndarray:
        return self.rot[:, 0]

    @property
    def vp_y(self) -> np.ndarray:
        return self.rot[:, 1]

    @property
    def vp_z(self) -> np.ndarray:
        return self.rot[:, 2]


def detect_edges(img: np.ndarray, cfg: ThresholdConfig = ThresholdConfig()) -> np.ndarray:
    """Canny edge raster of the panorama, seam-aware.

    The image is wrap-padded in azimuth before detection so edges crossing the
    +-pi seam are found like any others. Hysteresis thresholds are fractions
    of the max Sobel gradient magnitude of the blurred image.
    """
    check_equirect_dims(img.shape[:2])
    gray = img
    if gray.ndim == 3:
        gray = gray.mean(axis=2)
    if gray.dtype != np.uint8:
        g = gray.astype(float)
        top = g.max()
        gray = np.zeros_like(g, dtype=np.uint8) if top <= 0 else np.clip(
            g / top * 255.0, 0, 255
        ).astype(np.uint8)
    pad = 16
    wrapped = np.concatenate([gray[:, -pad:], gray, gray[:, :pad]], axis=1)
    blurred = cv2.GaussianBlur(wrapped, (0, 0), cfg.canny_sigma)
    gx = cv2.Sobel(blurred, cv2.CV_64F, 1, 0, ksize=3)
    gy = cv2.Sobel(blurred, cv2.CV_64F, 0, 1, ksize=3)
    gmax = float(np.sqrt(gx * gx + gy * gy).max())
    if gmax <= 0:
        return np.zeros(img.shape[:2], dtype=bool)
    edges = cv2.Canny(
        blurred,
        cfg.canny_low_frac * gmax,
        cfg.canny_high_frac * gmax,
        L2gradient=True,
    )
    return edges[:, pad:-pad] > 0


def cluster_edge_groups(
    edges: np.ndarray, cfg: ThresholdConfig = ThresholdConfig()
) -> list[EdgeGroup]:
    """8-connected components of the edge raster, merged across the azimuth seam.

    Components smaller than min_group_size (scaled by width/1024) are dropped.
    Groups are ordered by their first pixel in row-major order.
    """
    m, n = check_equirect_dims(edges.shape[:2])
    labels, count = ndimage.label(edges, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return []
    # union labels that touch across the seam (col n-1 adjacent to col 0)
    parent = np.arange(count + 1)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    left = labels[:, 0]
    right = labels[:, -1]
    for dr in (-1, 0, 1):
        shifted = np.roll(right, dr)
        if dr > 0:
            shifted[:dr] = 0
        elif dr < 0:
            shifted[dr:] = 0
        both = (left > 0) & (shifted > 0)
        for a, b in zip(left[both], shifted[both]):
            ra, rb = find(int(a)), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

    roots = np.array([find(i) for i in range(count + 1)])
    merged = roots[labels]
    min_size = max(3, round(cfg.min_group_size * n / 1024))
    flat = merged.ravel()
    order = np.argsort(flat, kind="stable")
    sorted_flat = flat[order]
    uniq, starts = np.unique(sorted_flat, return_index=True)
    ends = np.append(starts[1:], len(sorted_flat))
    groups: list[EdgeGroup] = []
    for root, s, e in zip(uniq, starts, ends):
        if root == 0 or e - s < min_size:
            continue
        idx = np.sort(order[s:e])  # row-major pixel order within the group
        pix = np.stack([idx // n, idx % n], axis=1)
        rays = pixel_to_ray(pix[:, 0], pix[:, 1], (m, n))
        groups.append(EdgeGroup(pixels=pix, rays=rays))
    # order by first pixel (row-major) for determinism
    groups.sort(key=lambda g: (int(g.pixels[0, 0]), int(g.pixels[0, 1])))
    return groups


def _arc_endpoints(normal: np.ndarray, rays: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Extremal points of the ray set along the circle with the given normal.

    The occupied arc is the complement of the largest angular gap; endpoints
    are placed exactly on the circle.
    """
    ref = np.array([0.0, 0.0, 1.0]) if abs(normal[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = unit(np.cross(normal, ref))
    v = np.cross(normal, u)
    ang = np.arctan2(rays @ v, rays @ u)
    order = np.sort(ang)
    gaps = np.diff(order, append=order[0] + 2.0 * np.pi)
    k = int(np.argmax(gaps))
    start = order[(k + 1) % len(order)]
    end = order[k]
    d1 = np.cos(start) * u + np.sin(start) * v
    d2 = np.cos(end) * u + np.sin(end) * v
    return d1, d2


def fit_great_circle(
    group: EdgeGroup,
    cfg: ThresholdConfig = ThresholdConfig(),
    rng: np.random.Generator | None = None,
) -> GreatCircleSegment | None:
    """RANSAC a great circle through the group's rays.

    A candidate normal is the cross product of two sampled rays; a ray is an
    inlier when its angle to the plane is within theta_th. The winning normal
    is refit by least squares (smallest singular vector of the inlier rays)
    and the inlier count re-evaluated against the refit plane. Returns None
    when fewer than half the rays support the model.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    rays = group.rays
    n_pts = len(rays)
    if n_pts < 2:
        return None
    sin_th = cfg.sin_theta
    best_n: np.ndarray | None = None
    best_count = 0
    needed = cfg.ransac_max_iters
    it = 0
    while it < min(needed, cfg.ransac_max_iters):
        it += 1
        i, j = rng.integers(0, n_pts, size=2)
        cand = np.cross(rays[i], rays[j])
        norm = np.linalg.norm(cand)
        if norm < 1e-12:
            continue  # parallel rays: resample
        cand /= norm
        count = int(np.count_nonzero(np.abs(rays @ cand) <= sin_th))
        if count > best_count:
            best_count = count
            best_n = cand
            w = count / n_pts
            if w >= 1.0:
                break
            denom = np.log1p(-min(w * w, 1.0 - 1e-12))
            needed = int(np.ceil(np.log(1.0 - cfg.ransac_confidence) / denom))
    if best_n is None or best_count < 0.5 * n_pts:
        return None
    # least-squares polish, iterated until the consensus set settles. The
    # working band is wider than theta_th: detectors mark band edges on both
    # sides of a thin line, and the polish must see both flanks to settle on
    # the centerline between them. Reported counts stay at theta_th.
    sin_work = float(np.sin(np.radians(3.0 * cfg.theta_th_deg)))
    normal, count = best_n, best_count
    inliers = np.abs(rays @ normal) <= sin_work
    for _ in range(5):
        _, _, vt = np.linalg.svd(rays[inliers], full_matrices=False)
        refit = vt[-1]
        if refit @ normal < 0:
            refit = -refit
        refit_count = int(np.count_nonzero(np.abs(rays @ refit) <= sin_th))
        if refit_count >= count:
            normal, count = refit, refit_count
        refit_in = np.abs(rays @ refit) <= sin_work
        if np.array_equal(refit_in, inliers):
            break
        inliers = refit_in
    if count < 0.5 * n_pts:
        return None
    support = rays[np.abs(rays @ normal) <= sin_th]
    d1, d2 = _arc_endpoints(normal, support)
    return GreatCircleSegment(
        normal=normal, d1=d1, d2=d2, inlier_count=count, pixel_length=n_pts
    )


def fit_groups(
    groups: list[EdgeGroup], cfg: ThresholdConfig = ThresholdConfig()
) -> list[GreatCircleSegment]:
    """Fit every group with its own deterministic rng (seed, group index)."""
    out = []
    for idx, group in enumerate(groups):
        seg = fit_great_circle(group, cfg, np.random.default_rng((cfg.seed, idx)))
        if seg is not None:
            out.append(seg)
    return out


def _canonical(v: np.ndarray) -> np.ndarray:
    """Fix the sign of a direction: largest-|component| coordinate >= 0."""
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def estimate_vanishing_basis(
    lines: list[GreatCircleSegment],
    cfg: ThresholdConfig = ThresholdConfig(),
    rng: np.random.Generator | None = None,
) -> VanishingBasis:
    """Manhattan vanishing basis from line normals.

    Candidate directions are cross products of normal pairs (all pairs when
    the line set is small, sampled otherwise); a line votes for a candidate
    when its normal is perpendicular to it within theta_th. The best pair of
    mutually orthogonal candidates plus their cross product forms the triple,
    which is then projected to the nearest rotation. The gravity column and
    handedness follow the VanishingBasis convention.
    """
    if len(lines) < 4:
        raise EstimationError(f"need at least 4 lines, got {len(lines)}")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    normals = np.stack([ln.normal for ln in lines])
    n_lines = len(normals)
    if n_lines <= 64:
        ii, jj = np.triu_indices(n_lines, k=1)
    else:
        ii = rng.integers(0, n_lines, size=3000)
        jj = rng.integers(0, n_lines, size=3000)
        keep = ii != jj
        ii, jj = ii[keep], jj[keep]
    cands = np.cross(normals[ii], normals[jj])
    norms = np.linalg.norm(cands, axis=1)
    cands = cands[norms > 1e-9] / norms[norms > 1e-9, None]
    if len(cands) == 0:
        raise EstimationError("all line normals are parallel")
    cands = np.apply_along_axis(_canonical, 1, cands)
    counts = np.count_nonzero(np.abs(normals @ cands.T) <= cfg.sin_theta, axis=0)

    # cluster candidates: keep strongest representative per direction
    order = np.lexsort((np.arange(len(cands)), -counts))
    reps: list[np.ndarray] = []
    rep_counts: list[int] = []
    cos_merge = np.cos(np.radians(cfg.theta_th_deg))
    for idx in order:
        c = cands[idx]
        if any(abs(float(c @ r)) >= cos_merge for r in reps):
            continue
        reps.append(c)
        rep_counts.append(int(counts[idx]))
        if len(reps) >= 32:
            break

    best = None
    sin_th = cfg.sin_theta
    for a in range(len(reps)):
        for b in range(a + 1, len(reps)):
            if abs(float(reps[a] @ reps[b])) > sin_th:
                continue  # not orthogonal within tolerance
            # right-handed by construction: a left-handed triple has no
            # nearest rotation when the reps are exactly orthonormal
            third = unit(np.cross(reps[a], reps[b]))
            third_count = int(np.count_nonzero(np.abs(normals @ third) <= sin_th))
            total = rep_counts[a] + rep_counts[b] + third_count
            if best is None or total > best[0]:
                best = (total, reps[a], reps[b], third)
    if best is None:
        raise EstimationError("fewer than 2 orthogonal direction clusters found")

    mat = np.stack([best[1], best[2], best[3]], axis=-1)
    uu, _, vvt = np.linalg.svd(mat)
    rot = uu @ np.diag([1.0, 1.0, np.linalg.det(uu @ vvt)]) @ vvt

    z_idx = int(np.argmax(np.abs(rot[2, :])))
    vp_z = rot[:, z_idx]
    if vp_z[2] < 0:
        vp_z = -vp_z
    rest = [i for i in range(3) if i != z_idx]
    vp_x = rot[:, rest[0]]
    vp_y = rot[:, rest[1]]
    basis = np.stack([vp_x, vp_y, vp_z], axis=-1)
    if np.linalg.det(basis) < 0:
        basis[:, 1] = -basis[:, 1]
    per_axis = tuple(
        int(np.count_nonzero(np.abs(normals @ basis[:, k]) <= sin_th)) for k in range(3)
    )
    return VanishingBasis(rot=basis, inliers=per_axis)


def classify_lines(
    lines: list[GreatCircleSegment],
    basis: VanishingBasis,
    cfg: ThresholdConfig = ThresholdConfig(),
) -> list[GreatCircleSegment]:
    """Label each line with the axis it is parallel to; drop unmatched lines.

    A line is parallel to axis k when its plane normal is perpendicular to
    vp_k within theta_th; ties go to the smaller residual.
    """
    out = []
    th = np.radians(cfg.theta_th_deg)
    for ln in lines:
        residuals = np.abs(np.arcsin(np.clip(basis.rot.T @ ln.normal, -1.0, 1.0)))
        k = int(np.argmin(residuals))
        if residuals[k] <= th:
            out.append(replace(ln, axis=AXES[k]))
    return out
