import { MaskRle } from "./rle";
import { RgbImage } from "./image";

/** Sub-pixel box, origin top-left: [x0, y0, x1, y1]. */
export type Box = [number, number, number, number];

export interface DetectionHit {
  box: Box;
  score: number;
  phrase: string;
}

/**
 * A detector/segmenter pair behind the wire protocol. The server stays a
 * thin wrapper: it returns every hit above the requested threshold and
 * leaves top-1 selection to clients.
 */
export interface Engine {
  readonly detectorId: string;
  readonly segmenterId: string;
  detect(
    image: RgbImage,
    prompt: string,
    boxThreshold: number,
    textThreshold: number,
  ): DetectionHit[];
  segment(image: RgbImage, box: Box): MaskRle;
}
