/**
 * Run-length codec for binary masks.
 *
 * Wire contract: counts alternate zero-run, one-run, zero-run, ... over the
 * ROW-MAJOR flattened mask, always starting with a (possibly 0-length)
 * zero-run; the counts sum to width*height.
 */

export interface MaskRle {
  height: number;
  width: number;
  counts: number[];
}

export function encodeRle(mask: Uint8Array, height: number, width: number): MaskRle {
  if (mask.length !== height * width) {
    throw new Error(`mask length ${mask.length} != ${height}x${width}`);
  }
  const counts: number[] = [];
  let current = 0; // zero-run first
  let run = 0;
  for (let i = 0; i < mask.length; i++) {
    const v = mask[i] ? 1 : 0;
    if (v === current) {
      run++;
    } else {
      counts.push(run);
      current = v;
      run = 1;
    }
  }
  counts.push(run);
  return { height, width, counts };
}

export function decodeRle(rle: MaskRle): Uint8Array {
  const total = rle.counts.reduce((a, b) => a + b, 0);
  if (total !== rle.height * rle.width) {
    throw new Error(`counts sum ${total} != ${rle.height}x${rle.width}`);
  }
  const out = new Uint8Array(total);
  let pos = 0;
  for (let i = 0; i < rle.counts.length; i++) {
    const value = i % 2; // even runs are zeros
    for (let k = 0; k < rle.counts[i]; k++) out[pos++] = value;
  }
  return out;
}

export function maskArea(rle: MaskRle): number {
  let ones = 0;
  for (let i = 1; i < rle.counts.length; i += 2) ones += rle.counts[i];
  return ones;
}
