// Minimal surface of the optional TensorFlow.js peer dependency; lets the
// adapter type-check without the package installed.
declare module "@tensorflow/tfjs" {
  export interface Tensor {
    dataSync(): Float32Array | Int32Array | Uint8Array;
    dispose(): void;
  }
  export interface LayersModel {
    predict(input: Tensor): Tensor | Tensor[];
  }
  export function tensor4d(
    values: Float32Array,
    shape: [number, number, number, number],
  ): Tensor;
  export function loadLayersModel(pathOrUrl: string): Promise<LayersModel>;
}
