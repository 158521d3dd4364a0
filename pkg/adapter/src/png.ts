/**
 * PNG codecs matching the core pipeline's map encodings.
 *
 * Probability maps: 8-bit grayscale, byte = round(value * 255).
 * Normal maps: 8-bit RGB, byte = round((component + 1) / 2 * 255), with the
 * exact byte triple (0, 0, 0) reserved as the "no normal" sentinel.
 */

import { PNG } from "pngjs";

export class FormatError extends Error {}

/** Single-channel image with values in [0, 1], row-major. */
export type GrayImage = {
  width: number;
  height: number;
  values: Float64Array;
};

/** Three channels per pixel, row-major; (0, 0, 0) marks "no normal". */
export type NormalImage = {
  width: number;
  height: number;
  values: Float64Array;
};

export function encodeProbPng(img: GrayImage): Buffer {
  const { width, height, values } = img;
  if (values.length !== width * height) {
    throw new FormatError("probability buffer does not match its dimensions");
  }
  const data = Buffer.alloc(width * height);
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    if (!(v >= 0 && v <= 1)) {
      throw new FormatError(`probability value ${v} outside [0, 1]`);
    }
    data[i] = Math.round(v * 255);
  }
  const png = new PNG({ width, height });
  return PNG.sync.write(Object.assign(png, { data }), {
    colorType: 0,
    inputColorType: 0,
    inputHasAlpha: false,
  });
}

export function decodeProbPng(buf: Buffer): GrayImage {
  const png = PNG.sync.read(buf);
  const values = new Float64Array(png.width * png.height);
  for (let i = 0; i < values.length; i++) {
    values[i] = png.data[4 * i] / 255;
  }
  return { width: png.width, height: png.height, values };
}

const UNIT_TOL = 1e-6;

export function encodeNormalPng(img: NormalImage): Buffer {
  const { width, height, values } = img;
  if (values.length !== 3 * width * height) {
    throw new FormatError("normal buffer does not match its dimensions");
  }
  const data = Buffer.alloc(3 * width * height);
  for (let p = 0; p < width * height; p++) {
    const x = values[3 * p];
    const y = values[3 * p + 1];
    const z = values[3 * p + 2];
    const norm = Math.hypot(x, y, z);
    if (norm === 0) {
      continue; // nil sentinel: bytes stay (0, 0, 0)
    }
    if (Math.abs(norm - 1) > UNIT_TOL) {
      throw new FormatError(`normal with length ${norm} is neither unit nor zero`);
    }
    data[3 * p] = Math.round(((x + 1) / 2) * 255);
    data[3 * p + 1] = Math.round(((y + 1) / 2) * 255);
    data[3 * p + 2] = Math.round(((z + 1) / 2) * 255);
  }
  const png = new PNG({ width, height });
  return PNG.sync.write(Object.assign(png, { data }), {
    colorType: 2,
    inputColorType: 2,
    inputHasAlpha: false,
  });
}

export function decodeNormalPng(buf: Buffer): NormalImage {
  const png = PNG.sync.read(buf);
  const values = new Float64Array(3 * png.width * png.height);
  for (let p = 0; p < png.width * png.height; p++) {
    const r = png.data[4 * p];
    const g = png.data[4 * p + 1];
    const b = png.data[4 * p + 2];
    if (r === 0 && g === 0 && b === 0) {
      continue;
    }
    values[3 * p] = (r / 255) * 2 - 1;
    values[3 * p + 1] = (g / 255) * 2 - 1;
    values[3 * p + 2] = (b / 255) * 2 - 1;
  }
  return { width: png.width, height: png.height, values };
}

/**
 * Read an arbitrary input image as grayscale in [0, 1] (ITU-R 601 luminance
 * for color inputs, matching the core's conversion).
 */
export function readGrayPng(buf: Buffer): GrayImage {
  const png = PNG.sync.read(buf);
  const values = new Float64Array(png.width * png.height);
  for (let i = 0; i < values.length; i++) {
    const r = png.data[4 * i];
    const g = png.data[4 * i + 1];
    const b = png.data[4 * i + 2];
    values[i] =
      r === g && g === b ? r / 255 : (0.299 * r + 0.587 * g + 0.114 * b) / 255;
  }
  return { width: png.width, height: png.height, values };
}
