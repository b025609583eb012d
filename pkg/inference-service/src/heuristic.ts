import { Box, DetectionHit, Engine } from "./engine";
import { RgbImage } from "./image";
import { MaskRle, encodeRle } from "./rle";

/**
 * Classical-vision engine: deterministic, model-free.
 *
 * Detection proposes connected components of pixels that stand out from the
 * border-estimated background color; segmentation classifies pixels inside
 * the prompt box against a ring-estimated background. This keeps the wire
 * protocol fully exercisable (and recordable into fixtures) on machines
 * without model checkpoints; language grounding is out of its reach, so the
 * prompt is echoed back as the phrase of every proposal.
 */
export class HeuristicEngine implements Engine {
  readonly detectorId = "heuristic-blob-detector/v1";
  readonly segmenterId = "heuristic-box-segmenter/v1";

  // distances below this never count as foreground (8-bit RGB euclidean)
  private static readonly MIN_CONTRAST = 12;
  private static readonly MIN_BLOB_PX = 9;
  private static readonly MAX_DIST = Math.sqrt(3 * 255 * 255);

  detect(
    image: RgbImage,
    prompt: string,
    boxThreshold: number,
    _textThreshold: number,
  ): DetectionHit[] {
    const { width, height } = image;
    const bg = borderMean(image);
    const dist = distanceField(image, bg);
    const thr = Math.max(HeuristicEngine.MIN_CONTRAST, otsu(dist));
    const fg = new Uint8Array(width * height);
    for (let i = 0; i < dist.length; i++) fg[i] = dist[i] > thr ? 1 : 0;

    const phrase = prompt.trim().toLowerCase();
    const hits: DetectionHit[] = [];
    for (const blob of connectedComponents(fg, width, height)) {
      if (blob.area < HeuristicEngine.MIN_BLOB_PX) continue;
      let sum = 0;
      for (const i of blob.pixels) sum += dist[i];
      const contrast = sum / blob.area / HeuristicEngine.MAX_DIST;
      const areaFrac = blob.area / (width * height);
      const score = round3(Math.min(
        0.99,
        0.2 + 0.6 * contrast + 0.2 * Math.sqrt(areaFrac),
      ));
      if (score < boxThreshold) continue;
      hits.push({
        box: [blob.x0, blob.y0, blob.x1 + 1, blob.y1 + 1],
        score,
        phrase,
      });
    }
    hits.sort((a, b) => b.score - a.score);
    return hits;
  }

  segment(image: RgbImage, box: Box): MaskRle {
    const { width, height } = image;
    const [bx0, by0, bx1, by1] = box;
    // pixel centers inside the half-open box
    const x0 = Math.max(0, Math.ceil(bx0 - 0.5));
    const x1 = Math.min(width, Math.ceil(bx1 - 0.5));
    const y0 = Math.max(0, Math.ceil(by0 - 0.5));
    const y1 = Math.min(height, Math.ceil(by1 - 0.5));

    const bg = ringMean(image, x0, y0, x1, y1) ?? borderMean(image);
    const inner: number[] = [];
    const dists: number[] = [];
    for (let y = y0; y < y1; y++) {
      for (let x = x0; x < x1; x++) {
        const i = y * width + x;
        inner.push(i);
        dists.push(colorDistance(image.data, i, bg));
      }
    }
    const mask = new Uint8Array(width * height);
    if (inner.length > 0) {
      const thr = Math.max(HeuristicEngine.MIN_CONTRAST, otsu(dists));
      for (let k = 0; k < inner.length; k++) {
        if (dists[k] > thr) mask[inner[k]] = 1;
      }
      keepLargestComponent(mask, width, height);
    }
    return encodeRle(mask, height, width);
  }
}

function round3(v: number): number {
  return Math.round(v * 1000) / 1000;
}

function colorDistance(data: Uint8Array, pixel: number, ref: [number, number, number]): number {
  const dr = data[pixel * 3] - ref[0];
  const dg = data[pixel * 3 + 1] - ref[1];
  const db = data[pixel * 3 + 2] - ref[2];
  return Math.sqrt(dr * dr + dg * dg + db * db);
}

function meanOf(image: RgbImage, pixels: number[]): [number, number, number] {
  let r = 0, g = 0, b = 0;
  for (const i of pixels) {
    r += image.data[i * 3];
    g += image.data[i * 3 + 1];
    b += image.data[i * 3 + 2];
  }
  const n = Math.max(1, pixels.length);
  return [r / n, g / n, b / n];
}

/** Mean color of the 2px frame border. */
function borderMean(image: RgbImage): [number, number, number] {
  const { width, height } = image;
  const pixels: number[] = [];
  const band = Math.min(2, height, width);
  for (let y = 0; y < height; y++) {
    const edgeRow = y < band || y >= height - band;
    for (let x = 0; x < width; x++) {
      if (edgeRow || x < band || x >= width - band) pixels.push(y * width + x);
    }
  }
  return meanOf(image, pixels);
}

/** Mean color of a 2px ring just outside the box; null when fully clipped. */
function ringMean(
  image: RgbImage, x0: number, y0: number, x1: number, y1: number,
): [number, number, number] | null {
  const { width, height } = image;
  const pixels: number[] = [];
  const rx0 = Math.max(0, x0 - 2);
  const ry0 = Math.max(0, y0 - 2);
  const rx1 = Math.min(width, x1 + 2);
  const ry1 = Math.min(height, y1 + 2);
  for (let y = ry0; y < ry1; y++) {
    for (let x = rx0; x < rx1; x++) {
      const insideBox = x >= x0 && x < x1 && y >= y0 && y < y1;
      if (!insideBox) pixels.push(y * width + x);
    }
  }
  return pixels.length > 0 ? meanOf(image, pixels) : null;
}

function distanceField(image: RgbImage, ref: [number, number, number]): Float64Array {
  const out = new Float64Array(image.width * image.height);
  for (let i = 0; i < out.length; i++) out[i] = colorDistance(image.data, i, ref);
  return out;
}

/** Otsu threshold over a 256-bin histogram of the values. */
function otsu(values: ArrayLike<number>): number {
  let max = 0;
  for (let i = 0; i < values.length; i++) if (values[i] > max) max = values[i];
  if (max <= 0) return 0;
  const bins = 256;
  const hist = new Float64Array(bins);
  for (let i = 0; i < values.length; i++) {
    const b = Math.min(bins - 1, Math.floor((values[i] / max) * (bins - 1)));
    hist[b] += 1;
  }
  const total = values.length;
  let sumAll = 0;
  for (let b = 0; b < bins; b++) sumAll += b * hist[b];
  let wB = 0, sumB = 0, best = 0, bestBin = 0;
  for (let b = 0; b < bins; b++) {
    wB += hist[b];
    if (wB === 0) continue;
    const wF = total - wB;
    if (wF === 0) break;
    sumB += b * hist[b];
    const mB = sumB / wB;
    const mF = (sumAll - sumB) / wF;
    const between = wB * wF * (mB - mF) * (mB - mF);
    if (between > best) {
      best = between;
      bestBin = b;
    }
  }
  return (bestBin / (bins - 1)) * max;
}

interface Blob {
  pixels: number[];
  area: number;
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

/** 4-connected components of set pixels (iterative flood fill). */
function connectedComponents(fg: Uint8Array, width: number, height: number): Blob[] {
  const seen = new Uint8Array(fg.length);
  const blobs: Blob[] = [];
  const stack: number[] = [];
  for (let start = 0; start < fg.length; start++) {
    if (!fg[start] || seen[start]) continue;
    const blob: Blob = {
      pixels: [], area: 0,
      x0: width, y0: height, x1: -1, y1: -1,
    };
    stack.length = 0;
    stack.push(start);
    seen[start] = 1;
    while (stack.length > 0) {
      const i = stack.pop()!;
      blob.pixels.push(i);
      blob.area++;
      const x = i % width;
      const y = (i - x) / width;
      if (x < blob.x0) blob.x0 = x;
      if (y < blob.y0) blob.y0 = y;
      if (x > blob.x1) blob.x1 = x;
      if (y > blob.y1) blob.y1 = y;
      if (x > 0 && fg[i - 1] && !seen[i - 1]) { seen[i - 1] = 1; stack.push(i - 1); }
      if (x < width - 1 && fg[i + 1] && !seen[i + 1]) { seen[i + 1] = 1; stack.push(i + 1); }
      if (y > 0 && fg[i - width] && !seen[i - width]) { seen[i - width] = 1; stack.push(i - width); }
      if (y < height - 1 && fg[i + width] && !seen[i + width]) { seen[i + width] = 1; stack.push(i + width); }
    }
    blobs.push(blob);
  }
  return blobs;
}

/** Drop everything but the largest 4-connected component, in place. */
function keepLargestComponent(mask: Uint8Array, width: number, height: number): void {
  const blobs = connectedComponents(mask, width, height);
  if (blobs.length <= 1) return;
  let largest = blobs[0];
  for (const blob of blobs) if (blob.area > largest.area) largest = blob;
  mask.fill(0);
  for (const i of largest.pixels) mask[i] = 1;
}
