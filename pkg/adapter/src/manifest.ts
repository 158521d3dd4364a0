/**
 * View-batch manifest: which perspective views to process, with the camera
 * parameters the core used to emit them, the model identifiers, and where
 * the inferred maps go.
 */

import * as fs from "node:fs";
import * as path from "node:path";

export class ManifestError extends Error {}

export type ViewEntry = {
  id: string;
  center: [number, number, number];
  fovDeg: number;
  resolution: number;
  rollDeg: number;
  /** Absolute path to the view image, resolved against the manifest. */
  image: string;
};

export type ViewBatchManifest = {
  formatVersion: number;
  views: ViewEntry[];
  models: { edges: string; normals: string };
  /** Absolute output directory, resolved against the manifest. */
  outputDir: string;
};

function fail(file: string, msg: string): never {
  throw new ManifestError(`${file}: ${msg}`);
}

function assertString(file: string, field: string, value: unknown): string {
  if (typeof value !== "string" || value.length === 0) {
    fail(file, `${field} must be a non-empty string`);
  }
  return value;
}

function assertNumber(file: string, field: string, value: unknown): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    fail(file, `${field} must be a finite number`);
  }
  return value;
}

function assertVec3(
  file: string,
  field: string,
  value: unknown,
): [number, number, number] {
  if (!Array.isArray(value) || value.length !== 3) {
    fail(file, `${field} must be an array of 3 numbers`);
  }
  const [x, y, z] = value.map((c, i) => assertNumber(file, `${field}[${i}]`, c));
  if (Math.hypot(x, y, z) === 0) {
    fail(file, `${field} must be a nonzero direction`);
  }
  return [x, y, z];
}

function parseView(file: string, dir: string, raw: unknown, index: number): ViewEntry {
  if (typeof raw !== "object" || raw === null) {
    fail(file, `views[${index}] must be an object`);
  }
  const v = raw as Record<string, unknown>;
  const id = assertString(file, `views[${index}].id`, v.id);
  if (!/^[A-Za-z0-9_-]+$/.test(id)) {
    fail(file, `views[${index}].id "${id}" must use only letters, digits, _ or -`);
  }
  const resolution = assertNumber(file, `views[${index}].resolution`, v.resolution);
  if (!Number.isInteger(resolution) || resolution < 8) {
    fail(file, `views[${index}].resolution must be an integer >= 8`);
  }
  const fovDeg = assertNumber(file, `views[${index}].fov_deg`, v.fov_deg);
  if (fovDeg <= 0 || fovDeg >= 180) {
    fail(file, `views[${index}].fov_deg must lie in (0, 180)`);
  }
  const image = path.resolve(
    dir,
    assertString(file, `views[${index}].image`, v.image),
  );
  if (!fs.existsSync(image)) {
    fail(file, `views[${index}].image does not exist: ${image}`);
  }
  return {
    id,
    center: assertVec3(file, `views[${index}].center`, v.center),
    fovDeg,
    resolution,
    rollDeg:
      v.roll_deg === undefined
        ? 0
        : assertNumber(file, `views[${index}].roll_deg`, v.roll_deg),
    image,
  };
}

export function parseManifest(file: string): ViewBatchManifest {
  let text: string;
  try {
    text = fs.readFileSync(file, "utf-8");
  } catch {
    fail(file, "cannot read manifest");
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    fail(file, `not valid JSON (${(err as Error).message})`);
  }
  if (typeof raw !== "object" || raw === null) {
    fail(file, "top level must be an object");
  }
  const m = raw as Record<string, unknown>;
  const formatVersion = assertNumber(file, "format_version", m.format_version);
  if (formatVersion !== 1) {
    fail(file, `unsupported format_version ${formatVersion}`);
  }
  if (!Array.isArray(m.views) || m.views.length === 0) {
    fail(file, "views must be a non-empty array");
  }
  const dir = path.dirname(path.resolve(file));
  const views = m.views.map((v, i) => parseView(file, dir, v, i));
  const seen = new Set<string>();
  for (const view of views) {
    if (seen.has(view.id)) {
      fail(file, `duplicate view id "${view.id}"`);
    }
    seen.add(view.id);
  }
  if (typeof m.models !== "object" || m.models === null) {
    fail(file, "models must be an object");
  }
  const models = m.models as Record<string, unknown>;
  return {
    formatVersion,
    views,
    models: {
      edges: assertString(file, "models.edges", models.edges),
      normals: assertString(file, "models.normals", models.normals),
    },
    outputDir: path.resolve(dir, assertString(file, "output_dir", m.output_dir)),
  };
}
