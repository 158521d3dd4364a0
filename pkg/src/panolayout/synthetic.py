"""Synthetic Manhattan rooms with exact ground truth.

A scene is a rectilinear prism (ceiling at z=+1, floor at z=-h, camera at the
origin) seen through a yaw-rotated panorama. Everything derivable is returned
exactly: the layout, the camera-to-room rotation, per-pixel surface labels,
and the structural edges as great-circle segments. Optional clutter adds
axis-aligned segments lying on room faces that do not touch structural edges
in the raster. Scenes also synthesize the two map inputs the pipeline expects
from a detector: an edge probability map and a per-pixel normal map with
controllable corruption.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import shapely
from scipy import ndimage

from .evaluation import LABEL_NONE, LABEL_X, LABEL_Y, LABEL_Z
from .geometry import _pano_rays, arc_pixels, arc_points, check_equirect_dims, unit
from .hypotheses import LayoutModel, validate_layout
from .lines import GreatCircleSegment, VanishingBasis

TRIM_DEG = 3.0  # arc shortening at both ends when drawing, keeps corners apart


@dataclass(frozen=True)
class SceneSpec:
    """Deterministic recipe for one synthetic room."""

    polygon: tuple[tuple[float, float], ...]  # clockwise ceiling footprint
    height: float                             # floor depth below the camera
    yaw_deg: float = 0.0                      # camera yaw inside the room
    clutter: int = 0                          # extra on-face segments
    line_noise_deg: float = 0.0               # random tilt applied per segment
    normal_flip_rate: float = 0.0             # normal map corruption rate
    seed: int = 0
    dims: tuple[int, int] = (256, 512)        # label / map resolution
    pano_dims: tuple[int, int] = (512, 1024)  # line drawing resolution

    @property
    def walls(self) -> int:
        return len(self.polygon)


@dataclass
class Scene:
    spec: SceneSpec
    layout: LayoutModel            # ground truth, room frame
    basis: VanishingBasis          # camera -> room axes
    labels: np.ndarray             # (dims) int8 ground-truth surface labels
    segments: list[GreatCircleSegment]          # structural edges, camera frame
    clutter_segments: list[GreatCircleSegment]
    corner_dirs: np.ndarray        # (2V,3) unit rays: V ceiling then V floor
    panorama: np.ndarray           # (pano_dims) float line drawing in [0,1]


def _rot_z(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rect_polygon(rng: np.random.Generator) -> tuple:
    x1, y1 = rng.uniform(0.8, 3.0, size=2)
    x0, y0 = -rng.uniform(0.8, 3.0, size=2)
    return ((x0, y1), (x1, y1), (x1, y0), (x0, y0))


def _ell_polygon(rng: np.random.Generator) -> tuple:
    x1, y1 = rng.uniform(1.0, 3.0, size=2)
    x0, y0 = -rng.uniform(0.8, 3.0, size=2)
    xn = x1 * rng.uniform(0.35, 0.7)
    yn = y1 * rng.uniform(0.35, 0.7)
    return ((x0, y1), (xn, y1), (xn, yn), (x1, yn), (x1, y0), (x0, y0))


def _u_polygon(rng: np.random.Generator) -> tuple:
    x1, y1 = rng.uniform(1.6, 3.0), rng.uniform(1.0, 3.0)
    x0, y0 = -rng.uniform(1.6, 3.0), -rng.uniform(0.8, 3.0)
    yn = y1 * rng.uniform(0.35, 0.7)
    xa = rng.uniform(x0 + 0.4, -0.2)
    xb = rng.uniform(0.2, x1 - 0.4)
    return ((x0, y1), (xa, y1), (xa, yn), (xb, yn), (xb, y1), (x1, y1), (x1, y0), (x0, y0))


_TEMPLATES = {4: _rect_polygon, 6: _ell_polygon, 8: _u_polygon}


def random_scene_spec(
    rng: np.random.Generator,
    walls: int = 4,
    clutter: int = 0,
    line_noise_deg: float = 0.0,
    normal_flip_rate: float = 0.0,
    dims: tuple[int, int] = (256, 512),
    pano_dims: tuple[int, int] = (512, 1024),
) -> SceneSpec:
    """Room with random proportions, depth and yaw; walls in {4, 6, 8}."""
    if walls not in _TEMPLATES:
        raise ValueError(f"unsupported wall count {walls}, pick from {sorted(_TEMPLATES)}")
    polygon = _TEMPLATES[walls](rng)
    return SceneSpec(
        polygon=polygon,
        height=float(rng.uniform(1.0, 2.5)),
        yaw_deg=float(rng.uniform(0.0, 360.0)),
        clutter=clutter,
        line_noise_deg=line_noise_deg,
        normal_flip_rate=normal_flip_rate,
        seed=int(rng.integers(0, 2**31)),
        dims=dims,
        pano_dims=pano_dims,
    )


def rasterize_reference_labels(
    layout: LayoutModel, rot: np.ndarray | None, dims: tuple[int, int]
) -> np.ndarray:
    """Ground-truth surface labels by nearest-hit search over prism faces.

    Kept deliberately different from evaluation.render_labels: caps use
    shapely containment, walls use a plane-normal formulation with inclusive
    bounds, so the two rasterizers cross-check each other.
    """
    rows, cols = check_equirect_dims(dims)
    rays = _pano_rays((rows, cols))
    if rot is not None:
        rays = rays @ rot
    rx = rays[..., 0].ravel()
    ry = rays[..., 1].ravel()
    rz = rays[..., 2].ravel()
    poly = np.asarray(layout.polygon, dtype=float)
    h = float(layout.height)
    shape = shapely.Polygon(poly)

    t_best = np.full(rx.shape, np.inf)
    labels = np.full(rx.shape, LABEL_NONE, dtype=np.int8)

    with np.errstate(divide="ignore", invalid="ignore"):
        for plane_z in (1.0, -h):
            t = plane_z / rz
            ok = np.isfinite(t) & (t > 1e-9)
            px = np.where(ok, rx * t, 0.0)
            py = np.where(ok, ry * t, 0.0)
            ok &= shapely.contains_xy(shape, px, py)
            take = ok & (t < t_best)
            t_best[take] = t[take]
            labels[take] = LABEL_Z

        v = len(poly)
        for i in range(v):
            a = poly[i]
            b = poly[(i + 1) % v]
            e = b - a
            n2 = np.array([e[1], -e[0]])  # in-plane wall normal
            denom = n2[0] * rx + n2[1] * ry
            t = (n2 @ a) / denom
            ok = np.isfinite(t) & (t > 1e-9)
            px, py, pz = rx * t, ry * t, rz * t
            s = ((px - a[0]) * e[0] + (py - a[1]) * e[1]) / (e @ e)
            ok &= (s >= -1e-12) & (s <= 1.0 + 1e-12)
            ok &= (pz >= -h - 1e-9) & (pz <= 1.0 + 1e-9)
            take = ok & (t < t_best)
            t_best[take] = t[take]
            labels[take] = LABEL_X if abs(n2[0]) > abs(n2[1]) else LABEL_Y

    labels = labels.reshape(rows, cols)
    missing = np.where(labels == LABEL_NONE)
    for r, c in zip(*missing):
        row = labels[r]
        good = np.where(row != LABEL_NONE)[0]
        if len(good):
            labels[r, c] = row[good[np.argmin(np.abs(good - c))]]
    return labels


def _edge_axis(a: np.ndarray, b: np.ndarray) -> str:
    return "X" if abs(b[0] - a[0]) > abs(b[1] - a[1]) else "Y"


def _make_segment(
    p1: np.ndarray, p2: np.ndarray, axis: str, dims: tuple[int, int]
) -> GreatCircleSegment:
    d1, d2 = unit(p1), unit(p2)
    normal = unit(np.cross(d1, d2))
    npix = len(arc_pixels(normal, d1, d2, dims))
    return GreatCircleSegment(
        normal=normal, d1=d1, d2=d2, inlier_count=npix, pixel_length=npix, axis=axis
    )


def _tilt_segment(
    seg: GreatCircleSegment, sigma_deg: float, rng: np.random.Generator
) -> GreatCircleSegment:
    axis = unit(rng.normal(size=3))
    angle = np.radians(rng.normal(0.0, sigma_deg))
    c, s = np.cos(angle), np.sin(angle)
    k = axis
    rot = (
        c * np.eye(3)
        + s * np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
        + (1 - c) * np.outer(k, k)
    )
    return GreatCircleSegment(
        normal=rot @ seg.normal,
        d1=rot @ seg.d1,
        d2=rot @ seg.d2,
        inlier_count=seg.inlier_count,
        pixel_length=seg.pixel_length,
        axis=seg.axis,
    )


def _structural_segments(
    poly: np.ndarray, h: float, cam: np.ndarray, dims: tuple[int, int]
) -> list[GreatCircleSegment]:
    v = len(poly)
    segs = []
    for i in range(v):
        a, b = poly[i], poly[(i + 1) % v]
        axis = _edge_axis(a, b)
        top_a = cam @ np.array([a[0], a[1], 1.0])
        top_b = cam @ np.array([b[0], b[1], 1.0])
        bot_a = cam @ np.array([a[0], a[1], -h])
        bot_b = cam @ np.array([b[0], b[1], -h])
        segs.append(_make_segment(top_a, top_b, axis, dims))
        segs.append(_make_segment(bot_a, bot_b, axis, dims))
        segs.append(_make_segment(top_a, bot_a, "Z", dims))
    return segs


def _clutter_segment(
    poly: np.ndarray, h: float, cam: np.ndarray, rng: np.random.Generator,
    dims: tuple[int, int],
) -> GreatCircleSegment | None:
    """One axis-aligned segment lying on a random face, inset from its border."""
    v = len(poly)
    face = int(rng.integers(0, v + 2))
    if face < v:
        a, b = poly[face], poly[(face + 1) % v]
        length = float(np.hypot(*(b - a)))
        depth = 1.0 + h
        horizontal = rng.random() < 0.5
        u = np.sort(rng.uniform(0.12, 0.88, size=2)) * length
        if u[1] - u[0] < 0.15 * length:
            return None
        z = rng.uniform(-h + 0.15 * depth, 1.0 - 0.15 * depth, size=2)
        if horizontal:
            z[:] = z[0]
        else:
            u[:] = u[0]
            z.sort()
            if z[1] - z[0] < 0.15 * depth:
                return None
        t = (b - a) / length
        p1 = np.array([a[0] + u[0] * t[0], a[1] + u[0] * t[1], z[0]])
        p2 = np.array([a[0] + u[1] * t[0], a[1] + u[1] * t[1], z[1]])
        axis = _edge_axis(a, b) if horizontal else "Z"
    else:
        zc = 1.0 if face == v else -h
        inner = shapely.Polygon(poly).buffer(-0.25)
        if inner.is_empty:
            return None
        minx, miny, maxx, maxy = inner.bounds
        cx = rng.uniform(minx, maxx)
        cy = rng.uniform(miny, maxy)
        half = 0.5 * rng.uniform(0.4, 1.2)
        along_x = rng.random() < 0.5
        d = np.array([half, 0.0]) if along_x else np.array([0.0, half])
        e1 = np.array([cx, cy]) - d
        e2 = np.array([cx, cy]) + d
        probes = np.stack([e1, e2, 0.5 * (e1 + e2)])
        if not np.all(shapely.contains_xy(inner, probes[:, 0], probes[:, 1])):
            return None
        p1 = np.array([e1[0], e1[1], zc])
        p2 = np.array([e2[0], e2[1], zc])
        axis = "X" if along_x else "Y"
    return _make_segment(cam @ p1, cam @ p2, axis, dims)


def _draw_segment(
    raster: np.ndarray, seg: GreatCircleSegment, trim_deg: float
) -> None:
    span = seg.span
    trim = np.radians(trim_deg)
    if span > 2.0 * trim + 1e-6:
        d1 = arc_points(seg.normal, seg.d1, trim, trim)[-1]
        d2 = arc_points(seg.normal, d1, span - 2.0 * trim, span)[-1]
    else:
        d1, d2 = seg.d1, seg.d2
    pix = arc_pixels(seg.normal, d1, d2, raster.shape)
    raster[pix[:, 0], pix[:, 1]] = 1.0


def generate_scene(spec: SceneSpec, trim_deg: float = TRIM_DEG) -> Scene:
    """Materialize a spec: ground truth, segments, clutter and line drawing."""
    poly = np.asarray(spec.polygon, dtype=float)
    layout = LayoutModel(polygon=poly, height=float(spec.height))
    ok, why = validate_layout(layout)
    if not ok:
        raise ValueError(f"scene polygon is not a valid layout: {why}")
    cam = _rot_z(-np.radians(spec.yaw_deg))  # columns: room axes in camera frame
    basis = VanishingBasis(rot=cam, inliers=(0, 0, 0))
    rng = np.random.default_rng(spec.seed)

    labels = rasterize_reference_labels(layout, cam, spec.dims)
    segments = _structural_segments(poly, spec.height, cam, spec.dims)
    if spec.line_noise_deg > 0:
        segments = [_tilt_segment(s, spec.line_noise_deg, rng) for s in segments]

    v = len(poly)
    tops = np.column_stack([poly, np.ones(v)])
    bots = np.column_stack([poly, np.full(v, -spec.height)])
    corner_dirs = unit(np.vstack([tops, bots]) @ cam.T)

    pano = np.zeros(spec.pano_dims, dtype=np.float32)
    for seg in segments:
        _draw_segment(pano, seg, trim_deg)
    forbidden = ndimage.binary_dilation(pano > 0, iterations=2)

    clutter: list[GreatCircleSegment] = []
    attempts = 0
    while len(clutter) < spec.clutter and attempts < 60 * max(spec.clutter, 1):
        attempts += 1
        seg = _clutter_segment(poly, spec.height, cam, rng, spec.dims)
        if seg is None:
            continue
        pix = arc_pixels(seg.normal, seg.d1, seg.d2, spec.pano_dims)
        if forbidden[pix[:, 0], pix[:, 1]].any():
            continue
        clutter.append(seg)
        mark = np.zeros_like(forbidden)
        mark[pix[:, 0], pix[:, 1]] = True
        forbidden |= ndimage.binary_dilation(mark, iterations=2)
        _draw_segment(pano, seg, 0.0)

    return Scene(
        spec=spec,
        layout=layout,
        basis=basis,
        labels=labels,
        segments=segments,
        clutter_segments=clutter,
        corner_dirs=corner_dirs,
        panorama=pano,
    )


def _line_peak(sigma: float) -> float:
    size = 4 * int(np.ceil(sigma)) + 9
    img = np.zeros((size, size))
    img[:, size // 2] = 1.0
    return float(ndimage.gaussian_filter(img, sigma)[size // 2, size // 2])


def synth_edge_map(
    segments: list[GreatCircleSegment],
    dims: tuple[int, int],
    sigma: float = 1.0,
) -> np.ndarray:
    """Edge probability map: blurred arc raster, 1.0 exactly on arc pixels."""
    rows, cols = check_equirect_dims(dims)
    raster = np.zeros((rows, cols))
    for seg in segments:
        pix = arc_pixels(seg.normal, seg.d1, seg.d2, dims)
        raster[pix[:, 0], pix[:, 1]] = 1.0
    blurred = ndimage.gaussian_filter(raster, sigma, mode=("nearest", "wrap"))
    out = np.clip(blurred / _line_peak(sigma), 0.0, 1.0)
    out[raster > 0] = 1.0
    return out


def synth_normal_map(
    labels: np.ndarray,
    basis: VanishingBasis,
    flip_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-pixel surface normals from labels, with controlled corruption.

    Each labeled pixel gets its axis normal signed toward the camera. A
    corrupted pixel becomes nil (zero vector) with probability 1/3, otherwise
    swaps to a wrong axis. Ceiling pixels are additionally nil at rate
    clip(3*flip_rate, 0.3, 0.9): overhead surfaces are where real detectors
    are least trustworthy, so even clean scenes exercise that failure mode.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    labels = np.asarray(labels)
    rows, cols = labels.shape
    rays = _pano_rays((rows, cols))
    normals = np.zeros((rows, cols, 3))
    axes = [basis.vp_x, basis.vp_y, basis.vp_z]
    for k, vp in enumerate(axes):
        mask = labels == k
        sign = np.where(rays @ vp >= 0.0, -1.0, 1.0)
        normals[mask] = sign[mask, None] * vp

    u_ceil = rng.random((rows, cols))
    u_flip = rng.random((rows, cols))
    u_kind = rng.random((rows, cols))
    u_axis = rng.random((rows, cols))

    ceil_rate = float(np.clip(3.0 * flip_rate, 0.3, 0.9))
    ceiling = (labels == LABEL_Z) & (rays[..., 2] > 0)
    nil = ceiling & (u_ceil < ceil_rate)
    corrupt = (labels != LABEL_NONE) & ~nil & (u_flip < flip_rate)
    nil |= corrupt & (u_kind < 1.0 / 3.0)
    swap = corrupt & (u_kind >= 1.0 / 3.0)
    normals[nil] = 0.0
    if np.any(swap):
        offset = 1 + (u_axis > 0.5).astype(int)
        wrong = (labels + offset) % 3
        rr, cc = np.where(swap)
        for r, c in zip(rr, cc):
            vp = axes[int(wrong[r, c])]
            s = -1.0 if float(rays[r, c] @ vp) >= 0.0 else 1.0
            normals[r, c] = s * vp
    normals[labels == LABEL_NONE] = 0.0
    return normals
