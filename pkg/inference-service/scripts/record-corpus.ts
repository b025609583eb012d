/**
 * Regenerate the recorded request corpus under test/corpus/.
 *
 * The corpus is committed: protocol-conformance tests replay these requests
 * against the app and validate every response against the wire schemas.
 *
 * Run with: npm run record-corpus
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { b64, rectangleScene, twoBlobScene } from "../test/synth";

const corpusDir = join(__dirname, "..", "test", "corpus");
mkdirSync(corpusDir, { recursive: true });

function record(name: string, endpoint: string, body: unknown): void {
  const doc = { endpoint, body };
  writeFileSync(join(corpusDir, name), JSON.stringify(doc, null, 1) + "\n");
  console.log(`recorded ${name}`);
}

const rect = rectangleScene();
const rectNoisy = rectangleScene(10);
const blobs = twoBlobScene();

record("detect_rect.json", "/v1/detect", {
  image_png_b64: b64(rect.image),
  prompt: "red rectangle on the floor",
  box_threshold: 0.3,
  text_threshold: 0.25,
});

record("detect_blobs_default.json", "/v1/detect", {
  image_png_b64: b64(blobs),
  prompt: "bright panel",
  box_threshold: 0.3,
  text_threshold: 0.25,
});

record("detect_blobs_strict.json", "/v1/detect", {
  image_png_b64: b64(blobs),
  prompt: "bright panel",
  box_threshold: 0.55,
  text_threshold: 0.25,
});

record("detect_noisy_rect.json", "/v1/detect", {
  image_png_b64: b64(rectNoisy.image),
  prompt: "Look at the red rectangle",
  box_threshold: 0.3,
  text_threshold: 0.25,
});

record("segment_rect.json", "/v1/segment", {
  image_png_b64: b64(rect.image),
  box: [18, 8, 62, 32],
});

record("segment_noisy_rect.json", "/v1/segment", {
  image_png_b64: b64(rectNoisy.image),
  box: [18, 8, 62, 32],
});

record("segment_tight_box.json", "/v1/segment", {
  image_png_b64: b64(blobs),
  box: [9.5, 9.5, 34.5, 30.5],
});
