import { PNG } from "pngjs";

/** Decoded RGB image, 3 bytes per pixel, row-major. */
export interface RgbImage {
  width: number;
  height: number;
  data: Uint8Array;
}

export class ImageDecodeError extends Error {}

export function decodePngBase64(b64: string): RgbImage {
  let raw: Buffer;
  try {
    raw = Buffer.from(b64, "base64");
  } catch {
    throw new ImageDecodeError("image_png_b64 is not valid base64");
  }
  // Buffer.from silently drops junk; round-trip to reject non-base64 input
  if (raw.length === 0 || raw.toString("base64").replace(/=+$/, "") !== b64.replace(/[\r\n\s]/g, "").replace(/=+$/, "")) {
    throw new ImageDecodeError("image_png_b64 is not valid base64");
  }
  let png: PNG;
  try {
    png = PNG.sync.read(raw);
  } catch {
    throw new ImageDecodeError("image_png_b64 is not a decodable PNG");
  }
  const { width, height } = png;
  const rgb = new Uint8Array(width * height * 3);
  for (let i = 0, j = 0; i < width * height; i++, j += 4) {
    rgb[i * 3] = png.data[j];
    rgb[i * 3 + 1] = png.data[j + 1];
    rgb[i * 3 + 2] = png.data[j + 2];
  }
  return { width, height, data: rgb };
}

export function encodePngBase64(img: RgbImage): string {
  const png = new PNG({ width: img.width, height: img.height });
  for (let i = 0, j = 0; i < img.width * img.height; i++, j += 4) {
    png.data[j] = img.data[i * 3];
    png.data[j + 1] = img.data[i * 3 + 1];
    png.data[j + 2] = img.data[i * 3 + 2];
    png.data[j + 3] = 255;
  }
  return PNG.sync.write(png).toString("base64");
}
