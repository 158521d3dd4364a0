/**
 * Command line front end.
 *
 * Usage:
 *   panolayout-adapter edges   --manifest batch.json [--stub] [--weights-dir DIR]
 *   panolayout-adapter normals --manifest batch.json [--stub] [--weights-dir DIR]
 *   panolayout-adapter all     --manifest batch.json [--stub] [--weights-dir DIR]
 *
 * Failures print "error [stage] message" to stderr and exit 1; bad usage
 * exits 2, matching the core pipeline's conventions.
 */

import * as process from "node:process";

import { ConfigurationError, resolveEdgeEngine, resolveNormalEngine } from "./engines.js";
import { inferBatch, InferError } from "./infer.js";
import { ManifestError, parseManifest } from "./manifest.js";
import { FormatError } from "./png.js";

const USAGE =
  "usage: panolayout-adapter {edges|normals|all} --manifest FILE [--stub] [--weights-dir DIR]";

type Args = {
  command: "edges" | "normals" | "all";
  manifest: string;
  stub: boolean;
  weightsDir?: string;
};

function parseArgs(argv: string[]): Args | null {
  const [command, ...rest] = argv;
  if (command !== "edges" && command !== "normals" && command !== "all") {
    return null;
  }
  const args: Args = { command, manifest: "", stub: false };
  for (let i = 0; i < rest.length; i++) {
    switch (rest[i]) {
      case "--manifest":
        args.manifest = rest[++i] ?? "";
        break;
      case "--stub":
        args.stub = true;
        break;
      case "--weights-dir":
        args.weightsDir = rest[++i];
        break;
      default:
        return null;
    }
  }
  return args.manifest ? args : null;
}

function stageOf(err: unknown): string {
  if (err instanceof ManifestError) return "manifest";
  if (err instanceof ConfigurationError) return "config";
  if (err instanceof InferError || err instanceof FormatError) return "infer";
  return "adapter";
}

export async function main(argv: string[]): Promise<number> {
  const args = parseArgs(argv);
  if (args === null) {
    process.stderr.write(`${USAGE}\n`);
    return 2;
  }
  try {
    const manifest = parseManifest(args.manifest);
    const opts = { stub: args.stub, weightsDir: args.weightsDir };
    const wantEdges = args.command !== "normals";
    const wantNormals = args.command !== "edges";
    const result = inferBatch(manifest, {
      edges: wantEdges ? await resolveEdgeEngine(manifest.models.edges, opts) : undefined,
      normals: wantNormals
        ? await resolveNormalEngine(manifest.models.normals, opts)
        : undefined,
    });
    process.stdout.write(
      `wrote ${result.outputs.length} maps for ${result.views} views ` +
        `to ${manifest.outputDir}\n`,
    );
    return 0;
  } catch (err) {
    const msg = err instanceof Error ? err.message : String(err);
    process.stderr.write(`error [${stageOf(err)}] ${msg}\n`);
    return 1;
  }
}
