"""Image and JSON codecs for pipeline artifacts.

Encodings:
  probability map  8-bit grayscale PNG, value/255
  normal map       24-bit RGB PNG, byte = round((c+1)/2*255); the exact byte
                   triple (0,0,0) is the nil sentinel (no unit vector maps
                   to it), checked before decoding
  label image      RGB PNG: X red, Y green, Z blue, unknown black
  panorama         8-bit grayscale PNG

All JSON artifacts carry format_version for forward compatibility.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .evaluation import LABEL_NONE, LABELS_XYZ
from .hypotheses import LayoutModel
from .lines import GreatCircleSegment, VanishingBasis

FORMAT_VERSION = 1

_LABEL_COLORS = np.array(
    [[255, 0, 0], [0, 255, 0], [0, 0, 255]], dtype=np.uint8
)


class FormatError(ValueError):
    """Raised when a file does not match its documented encoding."""


def write_prob_png(path, prob: np.ndarray) -> None:
    prob = np.asarray(prob, dtype=float)
    if prob.min() < 0 or prob.max() > 1:
        raise FormatError("probability map values must lie in [0, 1]")
    Image.fromarray(np.round(prob * 255).astype(np.uint8), mode="L").save(path)


def read_prob_png(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "L":
        img = img.convert("L")
    return np.asarray(img, dtype=float) / 255.0


def write_normal_png(path, normals: np.ndarray) -> None:
    normals = np.asarray(normals, dtype=float)
    if normals.ndim != 3 or normals.shape[2] != 3:
        raise FormatError("normal map must be (rows, cols, 3)")
    norms = np.linalg.norm(normals, axis=2)
    valid = norms > 0.5
    bad = valid & (np.abs(norms - 1.0) > 0.01)
    if np.any(bad):
        raise FormatError("normal map contains non-unit, non-nil vectors")
    data = np.zeros(normals.shape, dtype=np.uint8)
    enc = np.round((normals[valid] + 1.0) / 2.0 * 255.0).astype(np.uint8)
    # a valid normal can never encode to the nil sentinel (0,0,0): that would
    # need all components at -1; bump the darkest channel if rounding collides
    zero = np.all(enc == 0, axis=1)
    enc[zero, 0] = 1
    data[valid] = enc
    Image.fromarray(data, mode="RGB").save(path)


def read_normal_png(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "RGB":
        img = img.convert("RGB")
    data = np.asarray(img, dtype=np.uint8)
    nil = np.all(data == 0, axis=2)
    normals = data.astype(float) / 255.0 * 2.0 - 1.0
    norms = np.linalg.norm(normals, axis=2)
    safe = np.where(nil | (norms < 1e-9), 1.0, norms)
    normals = normals / safe[..., None]
    normals[nil] = 0.0
    return normals


def write_labels_png(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    rgb = np.zeros(labels.shape + (3,), dtype=np.uint8)
    for k in LABELS_XYZ:
        rgb[labels == k] = _LABEL_COLORS[k]
    Image.fromarray(rgb, mode="RGB").save(path)


def read_labels_png(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "RGB":
        img = img.convert("RGB")
    data = np.asarray(img, dtype=np.uint8)
    labels = np.full(data.shape[:2], LABEL_NONE, dtype=np.int8)
    matched = np.all(data == 0, axis=2)
    for k in LABELS_XYZ:
        hit = np.all(data == _LABEL_COLORS[k], axis=2)
        labels[hit] = k
        matched |= hit
    if not np.all(matched):
        raise FormatError("label image contains colors outside the palette")
    return labels


def write_pano_png(path, pano: np.ndarray) -> None:
    pano = np.asarray(pano, dtype=float)
    Image.fromarray(np.round(np.clip(pano, 0, 1) * 255).astype(np.uint8), mode="L").save(path)


def read_pano_png(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "L":
        img = img.convert("L")
    return np.asarray(img, dtype=float) / 255.0


def _vec(v) -> list:
    return [float(x) for x in np.asarray(v).ravel()]


def save_json(path, payload: dict) -> None:
    payload = {"format_version": FORMAT_VERSION, **payload}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_json(path) -> dict:
    payload = json.loads(Path(path).read_text())
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {version!r} in {path}")
    return payload


def segments_to_json(lines: list[GreatCircleSegment], basis: VanishingBasis | None = None) -> dict:
    payload = {
        "lines": [
            {
                "normal": _vec(l.normal),
                "d1": _vec(l.d1),
                "d2": _vec(l.d2),
                "inlier_count": int(l.inlier_count),
                "pixel_length": int(l.pixel_length),
                "axis": l.axis,
            }
            for l in lines
        ]
    }
    if basis is not None:
        payload["basis"] = {"rot": [_vec(r) for r in basis.rot], "inliers": list(basis.inliers)}
    return payload


def segments_from_json(payload: dict) -> tuple[list[GreatCircleSegment], VanishingBasis | None]:
    lines = [
        GreatCircleSegment(
            normal=np.array(l["normal"]),
            d1=np.array(l["d1"]),
            d2=np.array(l["d2"]),
            inlier_count=int(l["inlier_count"]),
            pixel_length=int(l["pixel_length"]),
            axis=l.get("axis"),
        )
        for l in payload["lines"]
    ]
    basis = None
    if "basis" in payload:
        basis = VanishingBasis(
            rot=np.array(payload["basis"]["rot"]),
            inliers=tuple(payload["basis"]["inliers"]),
        )
    return lines, basis


def layout_to_json(layout: LayoutModel) -> dict:
    return {
        "polygon": [[float(x), float(y)] for x, y in layout.polygon],
        "height": float(layout.height),
        "provenance": list(layout.provenance),
    }


def layout_from_json(payload: dict) -> LayoutModel:
    return LayoutModel(
        polygon=np.array(payload["polygon"], dtype=float),
        height=float(payload["height"]),
        provenance=tuple(payload.get("provenance", ())),
    )


def export_model(layout: LayoutModel, out_dir, stem: str = "layout") -> list[Path]:
    """Write the layout as JSON plus a wavefront-style closed mesh.

    Vertices are the polygon at z=+1 and z=-h; one quad per wall plus the
    ceiling and floor polygons as single faces, all outward-ordered, so every
    edge is shared by exactly two faces.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / f"{stem}.json"
    save_json(json_path, layout_to_json(layout))

    poly = np.asarray(layout.polygon, dtype=float)
    v = len(poly)
    h = float(layout.height)
    obj_path = out_dir / f"{stem}.obj"
    lines = ["# rectilinear room mesh"]
    for x, y in poly:
        lines.append(f"v {x:.9g} {y:.9g} 1")
    for x, y in poly:
        lines.append(f"v {x:.9g} {y:.9g} {-h:.9g}")
    # the polygon is clockwise seen from above, which is counterclockwise from
    # below: outward caps reverse the ceiling and keep the floor as stored
    lines.append("f " + " ".join(str(i + 1) for i in reversed(range(v))))
    lines.append("f " + " ".join(str(v + i + 1) for i in range(v)))
    for i in range(v):
        j = (i + 1) % v
        lines.append(f"f {i + 1} {j + 1} {v + j + 1} {v + i + 1}")
    obj_path.write_text("\n".join(lines) + "\n")
    return [json_path, obj_path]
