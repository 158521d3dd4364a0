export { main } from "./cli.js";
export {
  ConfigurationError,
  resolveEdgeEngine,
  resolveNormalEngine,
  type EdgeEngine,
  type EngineOptions,
  type NormalEngine,
} from "./engines.js";
export { inferBatch, InferError, type InferResult } from "./infer.js";
export {
  ManifestError,
  parseManifest,
  type ViewBatchManifest,
  type ViewEntry,
} from "./manifest.js";
export {
  decodeNormalPng,
  decodeProbPng,
  encodeNormalPng,
  encodeProbPng,
  FormatError,
  readGrayPng,
  type GrayImage,
  type NormalImage,
} from "./png.js";
export { stubEdges, stubNormals } from "./stub.js";
