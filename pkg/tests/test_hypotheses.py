import numpy as np
import pytest
from helpers import scene_corner_candidates

from panolayout.corners import CornerCandidate, classify_corner
from panolayout.evaluation import eop, render_labels
from panolayout.geometry import unit
from panolayout.hypotheses import (
    GenerationError,
    HypothesisConfig,
    LayoutModel,
    build_layout,
    estimate_floor_height,
    generate_hypotheses,
    sample_corner_group,
    validate_layout,
)
from panolayout.lines import VanishingBasis
from panolayout.synthetic import generate_scene, random_scene_spec

IDENTITY = VanishingBasis(rot=np.eye(3), inliers=(0, 0, 0))


def box(x0=-1.0, y0=-1.5, x1=2.0, y1=1.0, h=1.5):
    poly = np.array([(x0, y1), (x1, y1), (x1, y0), (x0, y0)], dtype=float)
    return LayoutModel(polygon=poly, height=h)


def candidate(xy, floor, h=1.5):
    z = -h if floor else 1.0
    d = unit(np.array([xy[0], xy[1], z]))
    hemisphere, quadrant = classify_corner(d, IDENTITY)
    return CornerCandidate(dir=d, hemisphere=hemisphere, quadrant=quadrant, parents=(0, 1))


class TestConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            HypothesisConfig(n_hypotheses=0)
        with pytest.raises(ValueError):
            HypothesisConfig(group_sizes=(2, 3))


class TestValidateLayout:
    def test_valid_box(self):
        ok, reason = validate_layout(box())
        assert ok, reason

    def test_valid_ell(self):
        poly = np.array([(-1, -1), (-1, 1), (2, 1), (2, -2), (0.5, -2), (0.5, -1)], float)
        ok, reason = validate_layout(LayoutModel(polygon=poly, height=2.0))
        assert ok, reason

    def test_bad_height(self):
        assert not validate_layout(LayoutModel(box().polygon, height=0.0))[0]
        assert not validate_layout(LayoutModel(box().polygon, height=float("nan")))[0]

    def test_odd_vertex_count(self):
        poly = np.array([(1, 1), (1, -1), (-1, -1)], float)
        ok, reason = validate_layout(LayoutModel(poly, 1.0))
        assert not ok and "even" in reason

    def test_collinear_consecutive_edges(self):
        # redundant midpoint on the top edge: orientations repeat
        poly = np.array([(-1, 1), (0.5, 1), (2, 1), (2, -1), (-1, -1), (-1, 0)], float)
        ok, reason = validate_layout(LayoutModel(poly, 1.0))
        assert not ok and "alternate" in reason

    def test_skewed_edge(self):
        poly = np.array([(-1, 1), (2, 1.5), (2, -1), (-1, -1)], float)
        assert not validate_layout(LayoutModel(poly, 1.0))[0]

    def test_small_skew_within_tolerance(self):
        poly = np.array([(-1, 1), (2, 1.05), (2, -1), (-1, -1)], float)
        assert validate_layout(LayoutModel(poly, 1.0), manhattan_tol_deg=5.0)[0]
        assert not validate_layout(LayoutModel(poly, 1.0), manhattan_tol_deg=0.5)[0]

    def test_counterclockwise_rejected(self):
        ok, reason = validate_layout(LayoutModel(box().polygon[::-1].copy(), 1.0))
        assert not ok and "clockwise" in reason

    def test_self_intersection_rejected(self):
        # bow-tie with axis-parallel edges, alternating orientations
        poly = np.array(
            [(-2, 1), (1, 1), (1, -2), (2, -2), (2, 2), (-2, 2), (-2, 3), (-3, 3)], float
        )
        ok, reason = validate_layout(LayoutModel(poly, 1.0))
        assert not ok

    def test_origin_outside_rejected(self):
        poly = np.array([(1, 3), (3, 3), (3, 1), (1, 1)], float)
        ok, reason = validate_layout(LayoutModel(poly, 1.0))
        assert not ok and "origin" in reason

    def test_degenerate_edge_rejected(self):
        poly = np.array([(-1, 1), (2, 1), (2, 1 - 1e-12), (-1, 1 - 1e-12)], float)
        ok, reason = validate_layout(LayoutModel(poly, 1.0))
        assert not ok


class TestFloorHeight:
    def test_closed_form_examples(self):
        c = unit(np.array([1.0, 1.0, -1.0]))
        assert estimate_floor_height(c, ("x", 2.0)) == pytest.approx(2.0)
        c = unit(np.array([1.0, 0.0, -2.0]))
        assert estimate_floor_height(c, ("x", 1.0)) == pytest.approx(2.0)

    def test_footprint_consistency(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            d = unit(np.array([rng.normal(), rng.normal(), -abs(rng.normal()) - 0.1]))
            h_true = rng.uniform(0.5, 3.0)
            p = d[:2] * (h_true / -d[2])  # footprint at that height
            axis = "x" if abs(p[0]) > 1e-6 else "y"
            value = p[0] if axis == "x" else p[1]
            assert estimate_floor_height(d, (axis, value)) == pytest.approx(h_true)

    def test_unusable_constraints(self):
        c = unit(np.array([1.0, 1.0, -1.0]))
        assert estimate_floor_height(c, ("x", -2.0)) is None  # wrong side
        c = unit(np.array([0.0, 1.0, -1.0]))
        assert estimate_floor_height(c, ("x", 2.0)) is None  # ray parallel to plane

    def test_ceiling_ray_rejected(self):
        with pytest.raises(ValueError):
            estimate_floor_height(np.array([1.0, 1.0, 1.0]), ("x", 2.0))


class TestSampleCornerGroup:
    def make_candidates(self):
        pts = [
            ((1, 1), False), ((-1, 1), False), ((-1, -1), False), ((1, -1), False),
            ((1, 1), True), ((-1, 1), True), ((-1, -1), True), ((1, -1), True),
        ]
        return [candidate(xy, fl) for xy, fl in pts]

    def test_constraints_hold_over_draws(self):
        cands = self.make_candidates()
        rng = np.random.default_rng(1)
        for _ in range(100):
            idx = sample_corner_group(cands, 4, rng)
            assert idx is not None
            chosen = [cands[i] for i in idx]
            assert len({c.quadrant for c in chosen}) >= 3
            assert len({c.hemisphere for c in chosen}) >= 2

    def test_returns_indices(self):
        cands = self.make_candidates()
        idx = sample_corner_group(cands, 3, np.random.default_rng(2))
        assert idx is not None
        assert all(isinstance(i, int) and 0 <= i < len(cands) for i in idx)

    def test_single_hemisphere_unsatisfiable(self):
        cands = [candidate(xy, False) for xy in [(1, 1), (-1, 1), (-1, -1), (1, -1)]]
        assert sample_corner_group(cands, 3, np.random.default_rng(3)) is None

    def test_cluster_separation(self):
        # two nearly identical q1 ceiling corners may not appear together
        cands = self.make_candidates()
        cands.append(candidate((1.001, 1.0), False))
        rng = np.random.default_rng(4)
        for _ in range(200):
            idx = sample_corner_group(cands, 4, rng)
            assert idx is not None
            assert not {0, 8} <= set(idx)

    def test_too_few_candidates(self):
        assert sample_corner_group(self.make_candidates()[:2], 3, np.random.default_rng(0)) is None


class TestBuildLayout:
    def test_box_from_three_corners(self):
        gt = box()
        h = gt.height
        group = [
            candidate((-1.0, 1.0), False, h),
            candidate((2.0, 1.0), True, h),
            candidate((2.0, -1.5), False, h),
        ]
        lay = build_layout(group, IDENTITY, HypothesisConfig())
        assert lay is not None
        assert lay.num_walls == 4
        assert lay.height == pytest.approx(h, rel=1e-12)
        got = {tuple(np.round(v, 9)) for v in lay.polygon}
        assert got == {tuple(v) for v in gt.polygon}

    def test_ell_from_four_corners_inserts_hidden(self):
        # four sampled corners, two hidden ones inserted at the joins
        poly = np.array([(2, 1), (-1, 1), (-1, -1), (0.5, -1), (0.5, -2), (2, -2)], float)
        h = 1.7
        group = [
            candidate((2.0, 1.0), True, h),
            candidate((-1.0, 1.0), False, h),
            candidate((-1.0, -1.0), False, h),
            candidate((0.5, -2.0), False, h),
        ]
        lay = build_layout(group, IDENTITY, HypothesisConfig(), ids=[10, 11, 12, 13])
        assert lay is not None
        assert lay.num_walls == 6
        assert lay.height == pytest.approx(h, rel=1e-12)
        got = {tuple(np.round(v, 9)) for v in lay.polygon}
        assert got == {tuple(v) for v in poly}
        assert sorted(lay.provenance) == [-1, -1, 10, 11, 12, 13]

    def test_all_ceiling_group_rejected(self):
        group = [candidate(xy, False) for xy in [(1, 1), (-1, 1), (-1, -1)]]
        assert build_layout(group, IDENTITY, HypothesisConfig()) is None

    def test_respects_basis_rotation(self):
        rng = np.random.default_rng(5)
        spec = random_scene_spec(rng, walls=4)
        scene = generate_scene(spec)
        cands = scene_corner_candidates(scene)
        lay = build_layout(cands[:2] + cands[-2:], scene.basis, HypothesisConfig())
        if lay is not None:
            assert lay.height == pytest.approx(scene.layout.height, rel=1e-9)


class TestGenerateHypotheses:
    def scene_and_candidates(self, walls=4, seed=31):
        rng = np.random.default_rng(seed)
        scene = generate_scene(random_scene_spec(rng, walls=walls))
        return scene, scene_corner_candidates(scene)

    def test_box_recovered_with_small_budget(self):
        scene, cands = self.scene_and_candidates()
        hyps = generate_hypotheses(cands, scene.basis, HypothesisConfig(n_hypotheses=10))
        dims = (64, 128)
        ref = render_labels(scene.layout, dims, scene.basis.rot)
        scores = [eop(render_labels(h, dims, scene.basis.rot), ref) for h in hyps]
        assert max(scores) >= 0.99

    def test_group_size_three_gives_four_walls(self):
        scene, cands = self.scene_and_candidates(walls=6, seed=32)
        cfg = HypothesisConfig(n_hypotheses=25, group_sizes=(3,))
        hyps = generate_hypotheses(cands, scene.basis, cfg)
        assert all(h.num_walls == 4 for h in hyps)

    def test_every_hypothesis_validates(self):
        rng = np.random.default_rng(33)
        scene = generate_scene(random_scene_spec(rng, walls=8))
        cands = scene_corner_candidates(scene, noise_deg=1.0, rng=rng)
        hyps = generate_hypotheses(cands, scene.basis, HypothesisConfig(n_hypotheses=60))
        for h in hyps:
            ok, reason = validate_layout(h)
            assert ok, reason

    def test_deterministic_and_deduplicated(self):
        scene, cands = self.scene_and_candidates(walls=6, seed=34)
        cfg = HypothesisConfig(n_hypotheses=30, seed=7)
        a = generate_hypotheses(cands, scene.basis, cfg)
        b = generate_hypotheses(cands, scene.basis, cfg)
        keys_a = [h.quantized_key() for h in a]
        keys_b = [h.quantized_key() for h in b]
        assert keys_a == keys_b
        assert len(set(keys_a)) == len(keys_a)

    def test_prefix_stable_in_budget(self):
        scene, cands = self.scene_and_candidates(walls=6, seed=35)
        small = generate_hypotheses(cands, scene.basis, HypothesisConfig(n_hypotheses=5, seed=3))
        large = generate_hypotheses(cands, scene.basis, HypothesisConfig(n_hypotheses=20, seed=3))
        assert [h.quantized_key() for h in small] == [h.quantized_key() for h in large][:5]

    def test_no_candidates_raises(self):
        with pytest.raises(GenerationError):
            generate_hypotheses([], IDENTITY, HypothesisConfig())

    def test_unusable_candidates_raise(self):
        cands = [candidate(xy, False) for xy in [(1, 1), (-1, 1), (-1, -1), (1, -1)]]
        with pytest.raises(GenerationError):
            generate_hypotheses(cands, IDENTITY, HypothesisConfig(n_hypotheses=2))
