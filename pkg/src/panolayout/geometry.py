"""Equirectangular panorama geometry.

Conventions used across the package:
  - Camera at the origin, +z is up (gravity axis).
  - Equirect row 0 is the +z pole; azimuth increases with column index.
  - Pixel centers: azimuth theta = 2*pi*(col+0.5)/N - pi,
    elevation phi = pi/2 - pi*(row+0.5)/M, for an M x N image with N = 2*M.
  - ray = (cos(phi)*cos(theta), cos(phi)*sin(theta), sin(phi)).
  - Perspective view frame: +x right, +y down, +z forward (OpenCV style).

Sampling is bilinear with azimuth wrap-around at the +-pi seam; pole rows
clamp elevation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

WORLD_UP = np.array([0.0, 0.0, 1.0])


def unit(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Normalize vectors along `axis`. Zero vectors raise."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=axis, keepdims=True)
    if np.any(n < 1e-15):
        raise ValueError("cannot normalize zero-length vector")
    return v / n


def check_equirect_dims(dims: tuple[int, int]) -> tuple[int, int]:
    m, n = int(dims[0]), int(dims[1])
    if m < 1 or n != 2 * m:
        raise ValueError(f"equirect dims must satisfy N = 2*M, got {dims}")
    return m, n


def pixel_to_ray(row, col, dims: tuple[int, int]) -> np.ndarray:
    """Map (fractional) pixel coordinates to unit rays.

    Accepts scalars or arrays; returns shape (..., 3). Integer coordinates
    address pixel centers.
    """
    m, n = check_equirect_dims(dims)
    row = np.asarray(row, dtype=float)
    col = np.asarray(col, dtype=float)
    if np.any(row < -0.5) or np.any(row > m - 0.5) or np.any(col < -0.5) or np.any(col > n - 0.5):
        raise ValueError("pixel coordinates out of bounds")
    theta = 2.0 * np.pi * (col + 0.5) / n - np.pi
    phi = np.pi / 2.0 - np.pi * (row + 0.5) / m
    cp = np.cos(phi)
    return np.stack([cp * np.cos(theta), cp * np.sin(theta), np.sin(phi)], axis=-1)


def ray_to_pixel(v: np.ndarray, dims: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of pixel_to_ray; returns continuous (row, col).

    Poles map into the first/last row band with col fixed to 0 (azimuth is
    undefined there).
    """
    m, n = check_equirect_dims(dims)
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1)
    if np.any(norm < 1e-15):
        raise ValueError("zero vector has no direction")
    x, y, z = v[..., 0] / norm, v[..., 1] / norm, v[..., 2] / norm
    theta = np.arctan2(y, x)
    phi = np.arcsin(np.clip(z, -1.0, 1.0))
    row = (np.pi / 2.0 - phi) * m / np.pi - 0.5
    col = (theta + np.pi) * n / (2.0 * np.pi) - 0.5
    at_pole = np.abs(z) >= 1.0 - 1e-12
    col = np.where(at_pole, 0.0, col)
    return row, col


def golden_spiral_directions(n: int) -> np.ndarray:
    """n directions on the unit sphere via the golden-section spiral.

    z_k = 1 - (2k+1)/n, azimuth_k = k*pi*(3 - sqrt(5)). Points are evenly
    spread, each roughly equidistant from its nearest neighbor.
    """
    if n < 1:
        raise ValueError("need at least one direction")
    k = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * k + 1.0) / n
    az = k * np.pi * (3.0 - np.sqrt(5.0))
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(az), r * np.sin(az), z], axis=-1)


@dataclass(frozen=True)
class ViewSpec:
    """A pinhole view into the panorama: square raster, fov in degrees.

    roll = 0 orients the view so image-up is the projection of world +z.
    """

    center: tuple[float, float, float]
    fov_deg: float = 70.0
    resolution: int = 320
    roll_deg: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError("fov must be in (0, 180) degrees")
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")


def _axis_rotation(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    x, y, z = axis
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) * c + s * k + (1.0 - c) * np.outer(axis, axis)


def view_rotation(view: ViewSpec) -> np.ndarray:
    """3x3 matrix whose columns are the view's right/down/forward axes in world
    coordinates, i.e. world = R @ v_view. det(R) = +1."""
    f = unit(np.asarray(view.center, dtype=float))
    up_hint = WORLD_UP
    if abs(float(f @ up_hint)) > 1.0 - 1e-9:
        up_hint = np.array([1.0, 0.0, 0.0])  # view at a pole: pick a fixed fallback
    u = unit(up_hint - (up_hint @ f) * f)
    d = -u
    r = np.cross(d, f)
    rot = np.stack([r, d, f], axis=-1)
    if view.roll_deg != 0.0:
        rot = _axis_rotation(f, np.radians(view.roll_deg)) @ rot
    return rot


def view_pixel_rays(view: ViewSpec) -> np.ndarray:
    """World-frame unit ray per view pixel, shape (Q, Q, 3)."""
    q = view.resolution
    half = np.tan(np.radians(view.fov_deg) / 2.0)
    t = (2.0 * (np.arange(q) + 0.5) / q - 1.0) * half
    xv, yv = np.meshgrid(t, t)  # yv indexes rows (down), xv columns (right)
    dirs = np.stack([xv, yv, np.ones_like(xv)], axis=-1)
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return dirs @ view_rotation(view).T


def sample_equirect(img: np.ndarray, row: np.ndarray, col: np.ndarray) -> np.ndarray:
    """Bilinear sample with column wrap and row clamp. img is (M,N) or (M,N,C)."""
    m, n = img.shape[0], img.shape[1]
    row = np.clip(row, -0.5, m - 0.5)
    r0 = np.floor(row).astype(np.int64)
    c0 = np.floor(col).astype(np.int64)
    fr = row - r0
    fc = col - c0
    r0c = np.clip(r0, 0, m - 1)
    r1c = np.clip(r0 + 1, 0, m - 1)
    c0w = np.mod(c0, n)
    c1w = np.mod(c0 + 1, n)
    img_f = img.astype(float, copy=False)
    if img_f.ndim == 3:
        fr = fr[..., None]
        fc = fc[..., None]
    v00 = img_f[r0c, c0w]
    v01 = img_f[r0c, c1w]
    v10 = img_f[r1c, c0w]
    v11 = img_f[r1c, c1w]
    top = v00 * (1.0 - fc) + v01 * fc
    bot = v10 * (1.0 - fc) + v11 * fc
    return top * (1.0 - fr) + bot * fr


def project_to_view(img: np.ndarray, view: ViewSpec) -> np.ndarray:
    """Extract a perspective view from the panorama (bilinear)."""
    check_equirect_dims(img.shape[:2])
    rays = view_pixel_rays(view)
    row, col = ray_to_pixel(rays, img.shape[:2])
    return sample_equirect(img, row, col)


def _view_coords(view: ViewSpec, rays: np.ndarray):
    """Project world rays into a view. Returns (i, j, covered) where (i, j) are
    continuous view pixel coordinates and covered marks rays inside the frustum."""
    q = view.resolution
    half = np.tan(np.radians(view.fov_deg) / 2.0)
    local = rays @ view_rotation(view)  # == R.T @ ray, batched
    zx = local[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = local[..., 0] / zx
        w = local[..., 1] / zx
    covered = (zx > 1e-12) & (np.abs(u) <= half) & (np.abs(w) <= half)
    j = (u / half + 1.0) * 0.5 * q - 0.5
    i = (w / half + 1.0) * 0.5 * q - 0.5
    return i, j, covered


@lru_cache(maxsize=8)
def _pano_rays_cached(m: int, n: int) -> np.ndarray:
    rows, cols = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    rays = pixel_to_ray(rows, cols, (m, n))
    rays.setflags(write=False)
    return rays


def _pano_rays(dims: tuple[int, int]) -> np.ndarray:
    m, n = check_equirect_dims(dims)
    return _pano_rays_cached(m, n)


def stitch_max(views: list[tuple[ViewSpec, np.ndarray]], dims: tuple[int, int]) -> np.ndarray:
    """Fuse per-view probability rasters into a panorama by per-pixel max.

    Pixels covered by no view are 0. Reduction order is fixed by list order
    (max is order-independent anyway).
    """
    if not views:
        raise ValueError("need at least one view")
    m, n = check_equirect_dims(dims)
    rays = _pano_rays(dims)
    out = np.zeros((m, n), dtype=float)
    for view, raster in views:
        if raster.shape[0] != view.resolution or raster.shape[1] != view.resolution:
            raise ValueError("raster resolution does not match its ViewSpec")
        i, j, covered = _view_coords(view, rays)
        ic = np.clip(i, 0.0, view.resolution - 1.0)
        jc = np.clip(j, 0.0, view.resolution - 1.0)
        r0 = np.floor(ic).astype(np.int64)
        c0 = np.floor(jc).astype(np.int64)
        r1 = np.minimum(r0 + 1, view.resolution - 1)
        c1 = np.minimum(c0 + 1, view.resolution - 1)
        fr = ic - r0
        fc = jc - c0
        val = (
            raster[r0, c0] * (1 - fr) * (1 - fc)
            + raster[r0, c1] * (1 - fr) * fc
            + raster[r1, c0] * fr * (1 - fc)
            + raster[r1, c1] * fr * fc
        )
        np.maximum(out, np.where(covered, val, 0.0), out=out)
    return out


def stitch_avg_normals(
    views: list[tuple[ViewSpec, np.ndarray]], dims: tuple[int, int]
) -> np.ndarray:
    """Fuse per-view normal rasters (view frame, nil = zero vector) into a
    world-frame panorama normal map by per-pixel averaging + renormalization.

    Nearest-neighbor lookup per view keeps nil pixels from bleeding into
    valid ones. Uncovered or all-nil pixels come out as (0,0,0).
    """
    if not views:
        raise ValueError("need at least one view")
    m, n = check_equirect_dims(dims)
    rays = _pano_rays(dims)
    acc = np.zeros((m, n, 3), dtype=float)
    for view, raster in views:
        if raster.shape[:2] != (view.resolution, view.resolution) or raster.shape[2] != 3:
            raise ValueError("normal raster must be (Q, Q, 3) matching its ViewSpec")
        i, j, covered = _view_coords(view, rays)
        ri = np.clip(np.rint(i).astype(np.int64), 0, view.resolution - 1)
        rj = np.clip(np.rint(j).astype(np.int64), 0, view.resolution - 1)
        local = raster[ri, rj]
        valid = covered & (np.linalg.norm(local, axis=-1) > 0.5)
        world = local @ view_rotation(view).T
        acc += np.where(valid[..., None], world, 0.0)
    norms = np.linalg.norm(acc, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore"):
        out = np.where(norms > 1e-9, acc / np.maximum(norms, 1e-30), 0.0)
    return out


def arc_span(normal: np.ndarray, d1: np.ndarray, d2: np.ndarray) -> float:
    """CCW angle about `normal` carrying d1 onto d2, in [0, 2*pi).

    Arcs everywhere in this package run counterclockwise about their circle
    normal from d1 to d2; (normal, d1, d2) therefore identifies the arc
    uniquely even when it exceeds pi.
    """
    u = np.asarray(d1, dtype=float)
    v = np.cross(normal, u)
    ang = float(np.arctan2(np.dot(d2, v), np.dot(d2, u)))
    return ang % (2.0 * np.pi)


def arc_points(normal: np.ndarray, d1: np.ndarray, span: float, step: float) -> np.ndarray:
    """Unit rays along the arc, spaced <= step radians, endpoints included."""
    if span < 0:
        raise ValueError("span must be non-negative")
    count = max(2, int(np.ceil(span / max(step, 1e-9))) + 1)
    alphas = np.linspace(0.0, span, count)
    u = np.asarray(d1, dtype=float)
    v = np.cross(normal, u)
    return np.cos(alphas)[:, None] * u + np.sin(alphas)[:, None] * v


def arc_pixels(
    normal: np.ndarray, d1: np.ndarray, d2: np.ndarray, dims: tuple[int, int]
) -> np.ndarray:
    """Integer pixels covered by the arc, deduplicated, ordered along the arc.

    Walks the circle at half-pixel angular steps (0.5 * pi / M) and rounds to
    the nearest pixel center, wrapping columns.
    """
    m, n = check_equirect_dims(dims)
    span = arc_span(normal, d1, d2)
    pts = arc_points(normal, d1, span, 0.5 * np.pi / m)
    row, col = ray_to_pixel(pts, dims)
    ri = np.clip(np.rint(row).astype(np.int64), 0, m - 1)
    ci = np.mod(np.rint(col).astype(np.int64), n)
    flat = ri * n + ci
    _, first = np.unique(flat, return_index=True)
    keep = np.sort(first)
    return np.stack([ri[keep], ci[keep]], axis=1)


def rotate_panorama(img: np.ndarray, rot: np.ndarray, interp: str = "bilinear") -> np.ndarray:
    """Resample the panorama under a world rotation.

    Output pixel p takes the input value at ray_to_pixel(R^T * pixel_to_ray(p)),
    so a feature at direction d moves to direction R @ d.
    """
    rot = np.asarray(rot, dtype=float)
    if rot.shape != (3, 3) or not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9):
        raise ValueError("rot must be a 3x3 rotation matrix")
    dims = img.shape[:2]
    rays = _pano_rays(dims)
    src = rays @ rot  # R^T applied to each ray
    row, col = ray_to_pixel(src, dims)
    if interp == "nearest":
        m, n = dims
        ri = np.clip(np.rint(row).astype(np.int64), 0, m - 1)
        ci = np.mod(np.rint(col).astype(np.int64), n)
        return img[ri, ci]
    if interp != "bilinear":
        raise ValueError(f"unknown interpolation mode {interp!r}")
    out = sample_equirect(img, row, col)
    return out.astype(img.dtype) if np.issubdtype(img.dtype, np.integer) else out
