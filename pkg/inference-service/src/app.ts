import express, { Express, NextFunction, Request, Response } from "express";

import { ServiceConfig } from "./config";
import { Box, Engine } from "./engine";
import { ImageDecodeError, RgbImage, decodePngBase64 } from "./image";

/** Holder that lets the server mark the engine ready after startup work. */
export interface EngineSlot {
  engine: Engine | null;
}

class HttpError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export function createApp(slot: EngineSlot, config: ServiceConfig): Express {
  const app = express();
  app.use(express.json({ limit: config.bodyLimit }));

  const ready = (): Engine => {
    if (!slot.engine) throw new HttpError(503, "models loading");
    return slot.engine;
  };

  app.get("/v1/health", (_req, res) => {
    const engine = ready();
    res.json({
      status: "ok",
      detector: engine.detectorId,
      segmenter: engine.segmenterId,
    });
  });

  app.post("/v1/detect", (req, res) => {
    const engine = ready();
    const body = objectBody(req);
    const image = decodeImage(body, config.maxImageSide);
    const prompt = stringField(body, "prompt");
    if (prompt.trim().length === 0) throw new HttpError(422, "prompt is empty");
    const boxThreshold = thresholdField(body, "box_threshold", 0.3);
    const textThreshold = thresholdField(body, "text_threshold", 0.25);
    const detections = engine.detect(image, prompt, boxThreshold, textThreshold);
    res.json({ detections });
  });

  app.post("/v1/segment", (req, res) => {
    const engine = ready();
    const body = objectBody(req);
    const image = decodeImage(body, config.maxImageSide);
    const box = boxField(body, image);
    res.json({ mask: engine.segment(image, box) });
  });

  // malformed JSON bodies and our typed failures both answer as 422
  app.use((err: unknown, _req: Request, res: Response, next: NextFunction) => {
    if (res.headersSent) return next(err);
    if (err instanceof HttpError) {
      res.status(err.status).json({ detail: err.message });
    } else if (err instanceof SyntaxError && "body" in (err as object)) {
      res.status(422).json({ detail: "request body is not valid JSON" });
    } else if (err instanceof Error && (err as { type?: string }).type === "entity.too.large") {
      res.status(413).json({ detail: "request body too large" });
    } else {
      next(err);
    }
  });

  return app;
}

function objectBody(req: Request): Record<string, unknown> {
  const body = req.body;
  if (typeof body !== "object" || body === null || Array.isArray(body)) {
    throw new HttpError(422, "request body must be a JSON object");
  }
  return body as Record<string, unknown>;
}

function stringField(body: Record<string, unknown>, key: string): string {
  const v = body[key];
  if (typeof v !== "string") throw new HttpError(422, `${key} must be a string`);
  return v;
}

function thresholdField(
  body: Record<string, unknown>, key: string, fallback: number,
): number {
  const v = body[key];
  if (v === undefined) return fallback;
  if (typeof v !== "number" || !Number.isFinite(v) || v <= 0 || v >= 1) {
    throw new HttpError(422, `${key} must be a number in (0, 1)`);
  }
  return v;
}

function decodeImage(body: Record<string, unknown>, maxSide: number): RgbImage {
  const b64 = stringField(body, "image_png_b64");
  let image: RgbImage;
  try {
    image = decodePngBase64(b64);
  } catch (err) {
    if (err instanceof ImageDecodeError) throw new HttpError(422, err.message);
    throw err;
  }
  if (Math.max(image.width, image.height) > maxSide) {
    throw new HttpError(413, `image side exceeds ${maxSide}`);
  }
  return image;
}

function boxField(body: Record<string, unknown>, image: RgbImage): Box {
  const v = body.box;
  if (!Array.isArray(v) || v.length !== 4 || !v.every((n) => typeof n === "number" && Number.isFinite(n))) {
    throw new HttpError(422, "box must be [x0, y0, x1, y1]");
  }
  const [x0, y0, x1, y1] = v as number[];
  if (!(x0 < x1 && y0 < y1)) throw new HttpError(422, "box is degenerate");
  if (x0 < 0 || y0 < 0 || x1 > image.width || y1 > image.height) {
    throw new HttpError(422, "box outside image bounds");
  }
  return [x0, y0, x1, y1];
}
