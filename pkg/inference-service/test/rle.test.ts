import { describe, expect, it } from "vitest";

import { decodeRle, encodeRle, maskArea } from "../src/rle";
import { lcg } from "./synth";

describe("run-length codec", () => {
  it("starts with a zero-run even when the mask starts set", () => {
    const rle = encodeRle(Uint8Array.from([1, 0, 0, 1]), 2, 2);
    expect(rle.counts).toEqual([0, 1, 2, 1]);
  });

  it("encodes an all-zero mask as a single run", () => {
    const rle = encodeRle(new Uint8Array(9), 3, 3);
    expect(rle.counts).toEqual([9]);
  });

  it("encodes an all-one mask with a leading zero-length run", () => {
    const rle = encodeRle(Uint8Array.from({ length: 12 }, () => 1), 3, 4);
    expect(rle.counts).toEqual([0, 12]);
    expect(maskArea(rle)).toBe(12);
  });

  it("is row-major", () => {
    // set pixel at row 1, col 0 of a 2x3 grid -> flat index 3
    const mask = new Uint8Array(6);
    mask[3] = 1;
    expect(encodeRle(mask, 2, 3).counts).toEqual([3, 1, 2]);
  });

  it("round-trips random masks exactly and sums to width*height", () => {
    const rand = lcg(42);
    for (let trial = 0; trial < 500; trial++) {
      const h = 1 + Math.floor(rand() * 24);
      const w = 1 + Math.floor(rand() * 24);
      const density = rand();
      const mask = new Uint8Array(h * w);
      for (let i = 0; i < mask.length; i++) mask[i] = rand() < density ? 1 : 0;
      const rle = encodeRle(mask, h, w);
      expect(rle.counts.reduce((a, b) => a + b, 0)).toBe(h * w);
      expect(decodeRle(rle)).toEqual(mask);
    }
  });

  it("rejects count sums that disagree with the dimensions", () => {
    expect(() => decodeRle({ height: 2, width: 2, counts: [3] })).toThrow();
  });
});
