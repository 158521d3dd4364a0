"""Closed Manhattan layout hypotheses from sampled corner groups.

A hypothesis is a closed rectilinear ceiling polygon (up to scale, ceiling
plane fixed at z = +1) plus a floor depth h (floor plane z = -h). Sampled
corners are azimuth-ordered; consecutive corners are joined by one wall when
their footprints align, otherwise by two walls around one inserted hidden
corner, with wall orientations strictly alternating. Floor corners only fix
their footprint once h is known, so h comes from the closed-form constraints
the single-wall joins impose, reconciled by median.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corners import CornerCandidate
from .geometry import unit
from .lines import VanishingBasis


class GenerationError(RuntimeError):
    """No valid layout could be generated within the retry budget."""


@dataclass(frozen=True)
class HypothesisConfig:
    n_hypotheses: int = 100
    group_sizes: tuple[int, ...] = (3, 4, 5)
    manhattan_tol_deg: float = 5.0
    seed: int = 0
    retry_factor: int = 200          # attempt budget = retry_factor * n_hypotheses
    sample_cluster_deg: float = 5.0  # min separation inside a group per (quadrant, hemisphere)
    dedup_quant: float = 1e-3        # layout dedup grid

    def __post_init__(self):
        if self.n_hypotheses < 1:
            raise ValueError("need n_hypotheses >= 1")
        if any(s < 3 for s in self.group_sizes):
            raise ValueError("group sizes must be >= 3")


@dataclass(frozen=True)
class LayoutModel:
    """Ceiling polygon (clockwise, rectilinear, (V,2)) + floor depth h > 0.

    provenance holds one entry per vertex: the sampled candidate id, or -1
    for an inserted hidden corner.
    """

    polygon: np.ndarray
    height: float
    provenance: tuple[int, ...] = field(default=())

    @property
    def num_walls(self) -> int:
        return len(self.polygon)

    def quantized_key(self, quant: float = 1e-3) -> tuple:
        coords = tuple(int(round(v / quant)) for v in self.polygon.ravel())
        return coords + (int(round(self.height / quant)),)


def validate_layout(
    layout: LayoutModel, manhattan_tol_deg: float = 5.0
) -> tuple[bool, str]:
    """Check every structural invariant; returns (ok, reason-if-not).

    Checks: positive finite height; even vertex count >= 4; edges axis-parallel
    within tolerance and strictly alternating; no degenerate edges; consecutive
    walls perpendicular within tolerance; simple polygon; clockwise orientation;
    origin strictly inside; no vertex on a coordinate axis; odd vertex count in
    every quadrant.
    """
    poly = np.asarray(layout.polygon, dtype=float)
    h = layout.height
    if not np.isfinite(h) or h <= 0:
        return False, "height not positive"
    if poly.ndim != 2 or poly.shape[1] != 2 or not np.all(np.isfinite(poly)):
        return False, "malformed polygon"
    v = len(poly)
    if v < 4 or v % 2 != 0:
        return False, "vertex count must be even and >= 4"
    edges = np.roll(poly, -1, axis=0) - poly
    lengths = np.linalg.norm(edges, axis=1)
    if lengths.min() < 1e-9:
        return False, "degenerate edge"
    tan_tol = np.tan(np.radians(manhattan_tol_deg))
    # orientation of each edge: 0 = along x, 1 = along y; must be within tol
    adx, ady = np.abs(edges[:, 0]), np.abs(edges[:, 1])
    orient = (ady > adx).astype(int)
    off_axis = np.where(orient == 0, ady, adx) > tan_tol * np.where(orient == 0, adx, ady)
    if np.any(off_axis):
        return False, "edge not axis-parallel within tolerance"
    if np.any(orient == np.roll(orient, -1)):
        return False, "wall orientations do not alternate"
    cosines = np.abs(
        np.sum(edges * np.roll(edges, -1, axis=0), axis=1)
        / (lengths * np.roll(lengths, -1))
    )
    if np.any(cosines > np.sin(np.radians(manhattan_tol_deg))):
        return False, "corner angle outside 90 degree tolerance"
    if _self_intersects(poly):
        return False, "polygon self-intersects"
    area2 = float(np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1]))
    if area2 >= 0:
        return False, "polygon not clockwise"
    if np.any(np.abs(poly) < 1e-12):
        return False, "vertex on a coordinate axis"
    if not _origin_strictly_inside(poly):
        return False, "origin not strictly inside"
    qcounts = [0, 0, 0, 0]
    for x, y in poly:
        if x > 0:
            qcounts[0 if y > 0 else 3] += 1
        else:
            qcounts[1 if y > 0 else 2] += 1
    if any(c % 2 == 0 for c in qcounts):
        return False, "even vertex count in a quadrant"
    return True, ""


def _self_intersects(poly: np.ndarray) -> bool:
    v = len(poly)
    segs = [(poly[i], poly[(i + 1) % v]) for i in range(v)]
    for i in range(v):
        for j in range(i + 1, v):
            if j == i or (j + 1) % v == i or (i + 1) % v == j:
                continue  # adjacent edges share a vertex by design
            if _segments_intersect(*segs[i], *segs[j]):
                return True
    return False


def _segments_intersect(p1, p2, p3, p4, eps: float = 1e-12) -> bool:
    def orient2(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_seg(a, b, c):
        return (
            min(a[0], b[0]) - eps <= c[0] <= max(a[0], b[0]) + eps
            and min(a[1], b[1]) - eps <= c[1] <= max(a[1], b[1]) + eps
        )

    d1 = orient2(p3, p4, p1)
    d2 = orient2(p3, p4, p2)
    d3 = orient2(p1, p2, p3)
    d4 = orient2(p1, p2, p4)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True
    if abs(d1) <= eps and on_seg(p3, p4, p1):
        return True
    if abs(d2) <= eps and on_seg(p3, p4, p2):
        return True
    if abs(d3) <= eps and on_seg(p1, p2, p3):
        return True
    if abs(d4) <= eps and on_seg(p1, p2, p4):
        return True
    return False


def _origin_strictly_inside(poly: np.ndarray, eps: float = 1e-9) -> bool:
    v = len(poly)
    inside = False
    for i in range(v):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % v]
        # distance from origin to the segment must stay positive
        dx, dy = x2 - x1, y2 - y1
        t = np.clip(-(x1 * dx + y1 * dy) / max(dx * dx + dy * dy, 1e-30), 0.0, 1.0)
        if np.hypot(x1 + t * dx, y1 + t * dy) < eps:
            return False
        if (y1 > 0) != (y2 > 0):
            xin = x1 + (0.0 - y1) * dx / dy
            if 0.0 < xin:
                inside = not inside
    return inside


def estimate_floor_height(c: np.ndarray, constraint: tuple[str, float]) -> float | None:
    """Height making the floor ray's footprint meet a neighbor wall coordinate.

    The floor point at height h projects to (h/(-c_z)) * (c_x, c_y); solving
    p_axis(h) = value gives h = -c_z * value / c_axis. Returns None when the
    constraint is unusable (c_axis ~ 0, or h would be <= 0).
    """
    c = unit(np.asarray(c, dtype=float))
    if c[2] >= 0:
        raise ValueError("floor rays must point below the horizon")
    axis, value = constraint
    idx = {"x": 0, "y": 1}[axis]
    if abs(c[idx]) < 1e-12:
        return None
    h = -c[2] * value / c[idx]
    return h if h > 0 else None


def sample_corner_group(
    cands: list[CornerCandidate],
    n: int,
    rng: np.random.Generator,
    cluster_deg: float = 5.0,
    max_retries: int = 40,
) -> list[int] | None:
    """Indices of n candidates usable as a layout seed, or None.

    Constraints: corners span >= 3 quadrants, both hemispheres are present,
    and no two picks share (quadrant, hemisphere) while being within
    cluster_deg of each other.
    """
    if len(cands) < n:
        return None
    cos_cluster = np.cos(np.radians(cluster_deg))
    for _ in range(max_retries):
        idx = rng.choice(len(cands), size=n, replace=False)
        chosen = [cands[i] for i in idx]
        if len({c.quadrant for c in chosen}) < 3:
            continue
        if len({c.hemisphere for c in chosen}) < 2:
            continue
        ok = True
        for a in range(n):
            for b in range(a + 1, n):
                ca, cb = chosen[a], chosen[b]
                if (
                    ca.quadrant == cb.quadrant
                    and ca.hemisphere == cb.hemisphere
                    and float(ca.dir @ cb.dir) >= cos_cluster
                ):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return [int(i) for i in idx]
    return None


def build_layout(
    group: list[CornerCandidate],
    basis: VanishingBasis,
    cfg: HypothesisConfig = HypothesisConfig(),
    ids: list[int] | None = None,
) -> LayoutModel | None:
    """Grow a closed layout from a corner group, or None when nothing closes.

    Enumerates wall structures (each azimuth gap hosting one wall or two walls
    around a hidden corner, orientations alternating, wall count even and at
    most 2*(n-1)) and keeps the first valid geometry, preferring fewer walls.
    """
    n = len(group)
    if ids is None:
        ids = list(range(n))
    dirs = np.stack([basis.rot.T @ c.dir for c in group])
    is_floor = dirs[:, 2] < 0
    if not np.any(is_floor) or np.all(is_floor):
        return None  # height would be unrecoverable
    if np.any(np.abs(dirs[:, 2]) < 1e-12):
        return None
    # footprint generators: ceiling corners are fixed points on z=+1;
    # floor corners scale with h: position = h * q
    planar = dirs[:, :2] / np.abs(dirs[:, 2])[:, None]
    azimuth = np.arctan2(dirs[:, 1], dirs[:, 0])
    order = np.argsort(-azimuth, kind="stable")  # clockwise from above
    tan_tol = np.tan(np.radians(cfg.manhattan_tol_deg))

    best: LayoutModel | None = None
    for first_orient in (0, 1):
        for pattern in _wall_patterns(planar, is_floor, order, first_orient, tan_tol):
            n_walls = sum(pattern)
            if n_walls % 2 or n_walls < 4 or n_walls > 2 * (n - 1):
                continue
            if best is not None and n_walls >= best.num_walls:
                continue  # prefer fewer walls, then enumeration order
            layout = _try_structure(
                group, ids, planar, is_floor, order, pattern, first_orient, tan_tol, cfg
            )
            if layout is not None and (best is None or layout.num_walls < best.num_walls):
                best = layout
    return best


def _aligned(pa: np.ndarray, pb: np.ndarray, direction: int, tan_tol: float) -> bool:
    """Is the segment a->b within tolerance of the axis `direction` (0=x, 1=y)?"""
    return abs(pb[1 - direction] - pa[1 - direction]) <= tan_tol * abs(
        pb[direction] - pa[direction]
    )


def _wall_patterns(
    planar: np.ndarray,
    is_floor: np.ndarray,
    order: np.ndarray,
    first_orient: int,
    tan_tol: float,
) -> list[tuple[int, ...]]:
    """Wall counts per azimuth gap, following the joining rule.

    A gap whose corners share a hemisphere is forced: one wall when they are
    aligned with the orientation alternation imposes, two otherwise. A
    ceiling-floor gap is alignable only under some height, which is unknown
    here, so both choices are explored when the single wall is sign-feasible
    (the later height reconciliation rejects bad branches).
    """
    n = len(order)
    out: list[tuple[int, ...]] = []

    def walk(g: int, orient: int, prefix: tuple[int, ...]):
        if g == n:
            out.append(prefix)
            return
        a, b = order[g], order[(g + 1) % n]
        pa, pb = planar[a], planar[b]
        fixed = 1 - orient
        if is_floor[a] == is_floor[b]:
            # footprint alignment is height-independent within a hemisphere
            choices = (1,) if _aligned(pa, pb, orient, tan_tol) else (2,)
        else:
            ceil_p, floor_q = (pa, pb) if is_floor[b] else (pb, pa)
            feasible = abs(floor_q[fixed]) > 1e-12 and ceil_p[fixed] / floor_q[fixed] > 0
            choices = (1, 2) if feasible else (2,)
        for c in choices:
            walk(g + 1, (orient + c) % 2, prefix + (c,))

    walk(0, first_orient, ())
    return out


def _try_structure(
    group: list[CornerCandidate],
    ids: list[int],
    planar: np.ndarray,
    is_floor: np.ndarray,
    order: np.ndarray,
    pattern: tuple[int, ...],
    first_orient: int,
    tan_tol: float,
    cfg: HypothesisConfig,
) -> LayoutModel | None:
    n = len(order)
    n_walls = sum(pattern)
    wall_start = np.concatenate([[0], np.cumsum(pattern)[:-1]])
    orient = [(first_orient + w) % 2 for w in range(n_walls)]  # 0: along x, 1: along y

    # pass 1: per-gap feasibility and closed-form h constraints
    h_constraints: list[tuple[float, float, float]] = []  # (h_est, value, q_fixed)
    for g in range(n):
        if pattern[g] != 1:
            continue
        a, b = order[g], order[(g + 1) % n]
        w = wall_start[g]
        fixed = 1 - orient[w]
        along = orient[w]
        pa, pb = planar[a], planar[b]
        if is_floor[a] == is_floor[b]:
            # same hemisphere: alignment is h-independent
            if abs(pb[fixed] - pa[fixed]) > tan_tol * abs(pb[along] - pa[along]):
                return None
        else:
            ceil_p, floor_q = (pa, pb) if is_floor[b] else (pb, pa)
            if abs(floor_q[fixed]) < 1e-12:
                return None
            h_est = ceil_p[fixed] / floor_q[fixed]
            if h_est <= 0:
                return None
            h_constraints.append((h_est, ceil_p[fixed], floor_q[fixed]))
    if not h_constraints:
        return None  # no single wall ties a floor corner to a ceiling one
    h = float(np.median([c[0] for c in h_constraints]))
    for _, value, q_fixed in h_constraints:
        if abs(h * q_fixed - value) > tan_tol * abs(value):
            return None

    pos = np.where(is_floor[:, None], h * planar, planar)

    # pass 2: wall coordinates from their sampled endpoints, then vertices
    vertex_gap: list[int] = []  # gap index of the sampled corner, -1 for hidden
    for g in range(n):
        vertex_gap.append(g)
        if pattern[g] == 2:
            vertex_gap.append(-1)
    values = np.zeros(n_walls)
    for w in range(n_walls):
        fixed = 1 - orient[w]
        ends = [vertex_gap[w], vertex_gap[(w + 1) % n_walls]]
        samples = [pos[order[g]][fixed] for g in ends if g >= 0]
        if not samples:
            return None
        values[w] = float(np.mean(samples))
    poly = np.zeros((n_walls, 2))
    prov = []
    for k in range(n_walls):
        w_in = (k - 1) % n_walls
        poly[k, 1 - orient[w_in]] = values[w_in]
        poly[k, 1 - orient[k]] = values[k]
        prov.append(ids[order[vertex_gap[k]]] if vertex_gap[k] >= 0 else -1)

    # canonical start vertex for stable dedup across groups
    start = int(np.lexsort((poly[:, 1], poly[:, 0]))[0])
    poly = np.roll(poly, -start, axis=0)
    prov = prov[start:] + prov[:start]
    layout = LayoutModel(polygon=poly, height=h, provenance=tuple(prov))
    ok, _ = validate_layout(layout, cfg.manhattan_tol_deg)
    return layout if ok else None


def generate_hypotheses(
    cands: list[CornerCandidate],
    basis: VanishingBasis,
    cfg: HypothesisConfig = HypothesisConfig(),
) -> list[LayoutModel]:
    """Sample corner groups until N_h distinct valid layouts (or budget runs out).

    Deterministic for a given config seed: attempt t draws from its own
    rng seeded (seed, t), so the hypothesis stream for a smaller N_h is a
    prefix of the stream for a larger one.
    """
    if not cands:
        raise GenerationError("no corner candidates")
    out: list[LayoutModel] = []
    seen: set[tuple] = set()
    cache: dict[frozenset, LayoutModel | None] = {}
    budget = cfg.retry_factor * cfg.n_hypotheses
    sizes = tuple(sorted(cfg.group_sizes))
    for attempt in range(budget):
        if len(out) >= cfg.n_hypotheses:
            break
        rng = np.random.default_rng((cfg.seed, attempt))
        size = int(sizes[rng.integers(0, len(sizes))])
        picked = sample_corner_group(cands, size, rng, cfg.sample_cluster_deg)
        if picked is None:
            continue
        key = frozenset(picked)
        if key in cache:
            layout = cache[key]
        else:
            layout = build_layout([cands[i] for i in picked], basis, cfg, ids=picked)
            cache[key] = layout
        if layout is None:
            continue
        qkey = layout.quantized_key(cfg.dedup_quant)
        if qkey in seen:
            continue
        seen.add(qkey)
        out.append(layout)
    if not out:
        raise GenerationError("no valid layout within the retry budget")
    return out
