/**
 * Batch inference over a view manifest.
 *
 * Each view produces <id>_edges.png and/or <id>_normals.png in the manifest's
 * output directory, at the view's own resolution. Files are written to a
 * temporary name and renamed into place so a crash never leaves a truncated
 * map behind.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as process from "node:process";

import type { EdgeEngine, NormalEngine } from "./engines.js";
import type { ViewBatchManifest, ViewEntry } from "./manifest.js";
import {
  encodeNormalPng,
  encodeProbPng,
  readGrayPng,
  type GrayImage,
} from "./png.js";

export class InferError extends Error {}

export type InferResult = {
  outputs: string[];
  views: number;
};

function loadView(view: ViewEntry): GrayImage {
  let img: GrayImage;
  try {
    img = readGrayPng(fs.readFileSync(view.image));
  } catch (err) {
    throw new InferError(
      `view "${view.id}": cannot read ${view.image} (${(err as Error).message})`,
    );
  }
  if (img.width !== view.resolution || img.height !== view.resolution) {
    throw new InferError(
      `view "${view.id}": image is ${img.width}x${img.height}, ` +
        `manifest says ${view.resolution}`,
    );
  }
  return img;
}

function writeAtomic(file: string, data: Buffer): void {
  const tmp = `${file}.tmp${process.pid}`;
  fs.writeFileSync(tmp, data);
  fs.renameSync(tmp, file);
}

export function inferBatch(
  manifest: ViewBatchManifest,
  engines: { edges?: EdgeEngine; normals?: NormalEngine },
): InferResult {
  fs.mkdirSync(manifest.outputDir, { recursive: true });
  const outputs: string[] = [];
  for (const view of manifest.views) {
    const img = loadView(view);
    if (engines.edges) {
      const file = path.join(manifest.outputDir, `${view.id}_edges.png`);
      writeAtomic(file, encodeProbPng(engines.edges(img)));
      outputs.push(file);
    }
    if (engines.normals) {
      const file = path.join(manifest.outputDir, `${view.id}_normals.png`);
      writeAtomic(file, encodeNormalPng(engines.normals(img)));
      outputs.push(file);
    }
  }
  return { outputs, views: manifest.views.length };
}
