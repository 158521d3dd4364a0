/**
 * Engine resolution: map a model identifier to a function that turns one
 * view image into an edge or normal map.
 *
 * The identifier "stub" (or the --stub flag) selects the analytic engines.
 * Any other identifier is treated as a trained model living under
 * <weightsDir>/<id>/model.json and executed with TensorFlow.js, which is an
 * optional dependency; a missing runtime or missing weights is a
 * configuration error, not an inference failure.
 *
 * Trained-model IO convention: input [1, H, W, C] float32 in [0, 1]
 * (C = 1 grayscale); edge models output [1, H, W, 1] in [0, 1], normal
 * models output [1, H, W, 3] view-frame components in [-1, 1].
 */

import * as fs from "node:fs";
import * as path from "node:path";

import type { GrayImage, NormalImage } from "./png.js";
import { stubEdges, stubNormals } from "./stub.js";

export class ConfigurationError extends Error {}

export type EdgeEngine = (view: GrayImage) => GrayImage;
export type NormalEngine = (view: GrayImage) => NormalImage;

export type EngineOptions = {
  stub?: boolean;
  weightsDir?: string;
};

function weightsPath(modelId: string, opts: EngineOptions): string {
  if (!opts.weightsDir) {
    throw new ConfigurationError(
      `model "${modelId}" needs --weights-dir (or use --stub)`,
    );
  }
  const file = path.join(opts.weightsDir, modelId, "model.json");
  if (!fs.existsSync(file)) {
    throw new ConfigurationError(`model weights not found: ${file}`);
  }
  return file;
}

type Tf = typeof import("@tensorflow/tfjs");

async function loadTf(): Promise<Tf> {
  try {
    return await import("@tensorflow/tfjs");
  } catch {
    throw new ConfigurationError(
      "@tensorflow/tfjs is not installed; install it or run with --stub",
    );
  }
}

async function loadModel(modelId: string, opts: EngineOptions) {
  const file = weightsPath(modelId, opts);
  const tf = await loadTf();
  const model = await tf.loadLayersModel(`file://${file}`);
  return { tf, model };
}

function runModel(
  tf: Tf,
  model: import("@tensorflow/tfjs").LayersModel,
  view: GrayImage,
  channels: number,
): Float64Array {
  const input = tf.tensor4d(
    Float32Array.from(view.values),
    [1, view.height, view.width, 1],
  );
  const output = model.predict(input) as import("@tensorflow/tfjs").Tensor;
  const flat = output.dataSync();
  input.dispose();
  output.dispose();
  if (flat.length !== channels * view.width * view.height) {
    throw new ConfigurationError(
      `model output has ${flat.length} values, expected ${channels} per pixel`,
    );
  }
  return Float64Array.from(flat);
}

export async function resolveEdgeEngine(
  modelId: string,
  opts: EngineOptions = {},
): Promise<EdgeEngine> {
  if (opts.stub || modelId === "stub") {
    return stubEdges;
  }
  const { tf, model } = await loadModel(modelId, opts);
  return (view) => {
    const values = runModel(tf, model, view, 1);
    for (let i = 0; i < values.length; i++) {
      values[i] = Math.min(1, Math.max(0, values[i]));
    }
    return { width: view.width, height: view.height, values };
  };
}

export async function resolveNormalEngine(
  modelId: string,
  opts: EngineOptions = {},
): Promise<NormalEngine> {
  if (opts.stub || modelId === "stub") {
    return stubNormals;
  }
  const { tf, model } = await loadModel(modelId, opts);
  return (view) => {
    const values = runModel(tf, model, view, 3);
    for (let p = 0; p < view.width * view.height; p++) {
      const x = values[3 * p];
      const y = values[3 * p + 1];
      const z = values[3 * p + 2];
      const norm = Math.hypot(x, y, z);
      if (norm > 0) {
        values[3 * p] = x / norm;
        values[3 * p + 1] = y / norm;
        values[3 * p + 2] = z / norm;
      }
    }
    return { width: view.width, height: view.height, values };
  };
}
