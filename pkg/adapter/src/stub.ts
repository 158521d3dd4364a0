/**
 * Analytic stand-in engines used when no trained model is available.
 *
 * They are deterministic, pure functions of the input view so batches can be
 * re-run byte-identically, and they respect the map conventions: edge
 * responses in [0, 1] that vanish on featureless input, and unit view-frame
 * normals (camera-facing, so the core's rotation to world coordinates has a
 * well-defined effect).
 */

import type { GrayImage, NormalImage } from "./png.js";

// max |gx| for a 3x3 Sobel on values in [0, 1] is 4, so the magnitude of
// (gx, gy) never exceeds 4 * sqrt(2)
const SOBEL_MAX = 4 * Math.SQRT2;

export function stubEdges(view: GrayImage): GrayImage {
  const { width, height, values } = view;
  const out = new Float64Array(width * height);
  const at = (r: number, c: number): number => {
    const rr = r < 0 ? 0 : r >= height ? height - 1 : r;
    const cc = c < 0 ? 0 : c >= width ? width - 1 : c;
    return values[rr * width + cc];
  };
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      const gx =
        at(r - 1, c + 1) +
        2 * at(r, c + 1) +
        at(r + 1, c + 1) -
        at(r - 1, c - 1) -
        2 * at(r, c - 1) -
        at(r + 1, c - 1);
      const gy =
        at(r + 1, c - 1) +
        2 * at(r + 1, c) +
        at(r + 1, c + 1) -
        at(r - 1, c - 1) -
        2 * at(r - 1, c) -
        at(r - 1, c + 1);
      out[r * width + c] = Math.min(1, Math.hypot(gx, gy) / SOBEL_MAX);
    }
  }
  return { width, height, values: out };
}

export function stubNormals(view: GrayImage): NormalImage {
  const { width, height } = view;
  const values = new Float64Array(3 * width * height);
  for (let p = 0; p < width * height; p++) {
    values[3 * p + 2] = -1; // camera-facing in the view frame
  }
  return { width, height, values };
}
