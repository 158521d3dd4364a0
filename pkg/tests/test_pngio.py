import numpy as np
import pytest
from PIL import Image

from panolayout.evaluation import LABEL_NONE, render_labels
from panolayout.geometry import unit
from panolayout.hypotheses import LayoutModel
from panolayout.lines import GreatCircleSegment, VanishingBasis
from panolayout.pngio import (
    FormatError,
    export_model,
    layout_from_json,
    layout_to_json,
    load_json,
    read_labels_png,
    read_normal_png,
    read_pano_png,
    read_prob_png,
    save_json,
    segments_from_json,
    segments_to_json,
    write_labels_png,
    write_normal_png,
    write_pano_png,
    write_prob_png,
)


def box_layout():
    poly = np.array([(-1.0, 1.0), (2.0, 1.0), (2.0, -1.5), (-1.0, -1.5)])
    return LayoutModel(polygon=poly, height=1.5, provenance=(0, 1, -1, 2))


class TestProbCodec:
    def test_round_trip_quantization(self, tmp_path):
        rng = np.random.default_rng(0)
        prob = rng.random((32, 64))
        p = tmp_path / "prob.png"
        write_prob_png(p, prob)
        back = read_prob_png(p)
        assert np.abs(back - prob).max() <= 0.5 / 255 + 1e-12

    def test_extremes_exact(self, tmp_path):
        prob = np.array([[0.0, 1.0]])
        p = tmp_path / "prob.png"
        write_prob_png(p, prob)
        np.testing.assert_array_equal(read_prob_png(p), prob)

    def test_out_of_range_rejected(self, tmp_path):
        with pytest.raises(FormatError):
            write_prob_png(tmp_path / "bad.png", np.full((4, 8), 1.5))


class TestNormalCodec:
    def test_round_trip_error_bound(self, tmp_path):
        rng = np.random.default_rng(1)
        nm = unit(rng.normal(size=(32, 64, 3)))
        nm[:4] = 0.0  # nil band
        p = tmp_path / "n.png"
        write_normal_png(p, nm)
        back = read_normal_png(p)
        # nil pixels come back exactly nil
        np.testing.assert_array_equal(back[:4], 0.0)
        # others unit and within a byte of the original per channel
        norms = np.linalg.norm(back[4:], axis=-1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)
        raw = np.asarray(Image.open(p), dtype=float)[4:] / 255.0 * 2.0 - 1.0
        assert np.abs(raw - nm[4:]).max() <= 1.0 / 255

    def test_axis_normals_recovered_precisely(self, tmp_path):
        nm = np.zeros((4, 8, 3))
        nm[..., 2] = -1.0
        p = tmp_path / "n.png"
        write_normal_png(p, nm)
        back = read_normal_png(p)
        assert np.abs(back - nm).max() < 1e-2

    def test_non_unit_rejected_on_write(self, tmp_path):
        nm = np.full((4, 8, 3), 0.9)
        with pytest.raises(FormatError):
            write_normal_png(tmp_path / "n.png", nm)

    def test_bad_shape_rejected(self, tmp_path):
        with pytest.raises(FormatError):
            write_normal_png(tmp_path / "n.png", np.zeros((4, 8)))


class TestLabelsCodec:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        labels = rng.integers(-1, 3, size=(32, 64)).astype(np.int8)
        p = tmp_path / "labels.png"
        write_labels_png(p, labels)
        np.testing.assert_array_equal(read_labels_png(p), labels)

    def test_real_render_round_trip(self, tmp_path):
        labels = render_labels(box_layout(), (32, 64))
        p = tmp_path / "labels.png"
        write_labels_png(p, labels)
        np.testing.assert_array_equal(read_labels_png(p), labels)

    def test_off_palette_color_rejected(self, tmp_path):
        img = np.zeros((4, 8, 3), dtype=np.uint8)
        img[2, 3] = (128, 128, 0)
        p = tmp_path / "bad.png"
        Image.fromarray(img, mode="RGB").save(p)
        with pytest.raises(FormatError):
            read_labels_png(p)


class TestPanoCodec:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        pano = rng.random((32, 64))
        p = tmp_path / "pano.png"
        write_pano_png(p, pano)
        assert np.abs(read_pano_png(p) - pano).max() <= 0.5 / 255 + 1e-12


class TestJson:
    def test_version_stamped_and_checked(self, tmp_path):
        p = tmp_path / "x.json"
        save_json(p, {"a": 1})
        assert load_json(p)["a"] == 1
        p.write_text('{"format_version": 99, "a": 1}')
        with pytest.raises(FormatError):
            load_json(p)

    def test_missing_version_rejected(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text('{"a": 1}')
        with pytest.raises(FormatError):
            load_json(p)

    def test_segments_round_trip(self):
        d1 = unit(np.array([1.0, 0.2, 0.3]))
        d2 = unit(np.array([0.1, 1.0, 0.3]))
        seg = GreatCircleSegment(
            normal=unit(np.cross(d1, d2)), d1=d1, d2=d2,
            inlier_count=42, pixel_length=50, axis="X",
        )
        basis = VanishingBasis(rot=np.eye(3), inliers=(4, 5, 6))
        payload = segments_to_json([seg], basis)
        lines, basis2 = segments_from_json(payload)
        assert len(lines) == 1
        np.testing.assert_array_equal(lines[0].normal, seg.normal)
        np.testing.assert_array_equal(lines[0].d1, seg.d1)
        assert lines[0].axis == "X"
        assert lines[0].inlier_count == 42
        assert basis2 is not None
        np.testing.assert_array_equal(basis2.rot, np.eye(3))
        assert basis2.inliers == (4, 5, 6)

    def test_segments_without_basis(self):
        payload = segments_to_json([])
        lines, basis = segments_from_json(payload)
        assert lines == [] and basis is None

    def test_layout_round_trip(self):
        lay = box_layout()
        back = layout_from_json(layout_to_json(lay))
        np.testing.assert_array_equal(back.polygon, lay.polygon)
        assert back.height == lay.height
        assert back.provenance == lay.provenance


def parse_obj(text):
    verts, faces = [], []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append(tuple(float(x) for x in parts[1:]))
        elif parts[0] == "f":
            faces.append(tuple(int(x) for x in parts[1:]))
    return verts, faces


class TestExportModel:
    def test_files_and_counts(self, tmp_path):
        paths = export_model(box_layout(), tmp_path)
        assert [p.name for p in paths] == ["layout.json", "layout.obj"]
        verts, faces = parse_obj(paths[1].read_text())
        assert len(verts) == 8
        assert len(faces) == 6
        lay = layout_from_json(load_json(paths[0]))
        np.testing.assert_array_equal(lay.polygon, box_layout().polygon)

    def test_six_wall_counts(self, tmp_path):
        poly = np.array([(-1, -1), (-1, 1), (2, 1), (2, -2), (0.5, -2), (0.5, -1)], float)
        paths = export_model(LayoutModel(polygon=poly, height=2.0), tmp_path, stem="ell")
        verts, faces = parse_obj(paths[1].read_text())
        assert len(verts) == 12
        assert len(faces) == 8

    def test_mesh_is_closed_and_consistent(self, tmp_path):
        # every directed edge appears exactly once: closed, consistently wound
        paths = export_model(box_layout(), tmp_path)
        _, faces = parse_obj(paths[1].read_text())
        directed = []
        for f in faces:
            for a, b in zip(f, f[1:] + f[:1]):
                directed.append((a, b))
        assert len(directed) == len(set(directed))
        assert {(b, a) for a, b in directed} == set(directed)

    def test_vertex_geometry(self, tmp_path):
        lay = box_layout()
        paths = export_model(lay, tmp_path)
        verts, _ = parse_obj(paths[1].read_text())
        top = np.array(verts[:4])
        bottom = np.array(verts[4:])
        np.testing.assert_allclose(top[:, 2], 1.0)
        np.testing.assert_allclose(bottom[:, 2], -lay.height)
        np.testing.assert_allclose(top[:, :2], lay.polygon)
