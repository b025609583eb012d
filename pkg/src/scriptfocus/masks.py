"""Binary segmentation masks: run-length codec, box rasterization, shifting.

The RLE contract: counts alternate zero-run, one-run, zero-run, ... over the
row-major flattened mask, always starting with a (possibly 0-length)
zero-run, and sum(counts) == width*height. This makes ordering explicit in
the file format and on the wire.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import FrameDims, split_wrapped_bbox


class MalformedRLE(ValueError):
    """Counts do not satisfy the run-length contract."""


@dataclass(frozen=True)
class MaskRLE:
    height: int
    width: int
    counts: tuple[int, ...]

    @property
    def ones(self) -> int:
        return int(sum(self.counts[1::2]))


def rle_encode(mask: np.ndarray) -> MaskRLE:
    grid = np.asarray(mask)
    if grid.ndim != 2 or grid.size == 0:
        raise ValueError("mask must be a non-empty 2-D grid")
    flat = (grid != 0).astype(np.int8).ravel()
    change = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [flat.size]))
    counts = (ends - starts).tolist()
    if flat[0] == 1:
        counts.insert(0, 0)
    h, w = grid.shape
    return MaskRLE(height=int(h), width=int(w), counts=tuple(int(c) for c in counts))


def rle_decode(rle: MaskRLE) -> np.ndarray:
    if rle.height <= 0 or rle.width <= 0:
        raise MalformedRLE(f"bad mask dims {rle.width}x{rle.height}")
    counts = np.asarray(rle.counts, dtype=np.int64)
    if counts.ndim != 1 or counts.size == 0 or (counts < 0).any():
        raise MalformedRLE("counts must be non-negative integers")
    total = int(counts.sum())
    if total != rle.height * rle.width:
        raise MalformedRLE(
            f"counts sum {total} != {rle.height}x{rle.width} = {rle.height * rle.width}"
        )
    values = np.arange(counts.size, dtype=np.int64) % 2  # zero-run first
    flat = np.repeat(values, counts)
    return flat.astype(bool).reshape(rle.height, rle.width)


def mask_from_box(
    box_raw: tuple[float, float, float, float], dims: FrameDims
) -> np.ndarray:
    """Rasterize a (possibly seam-wrapping) box: pixels whose centers fall in
    [x0, x1) x [y0, y1). Guaranteed non-empty (falls back to the box center
    pixel for sub-pixel boxes)."""
    grid = np.zeros((dims.height, dims.width), dtype=bool)
    for b in split_wrapped_bbox(box_raw, dims):
        x_lo = max(0, math.ceil(b.x0 - 0.5))
        x_hi = min(dims.width, math.ceil(b.x1 - 0.5))
        y_lo = max(0, math.ceil(b.y0 - 0.5))
        y_hi = min(dims.height, math.ceil(b.y1 - 0.5))
        grid[y_lo:y_hi, x_lo:x_hi] = True
    if not grid.any():
        x0, y0, x1, y1 = box_raw
        cx = min(dims.width - 1, max(0, int((x0 + x1) / 2 % dims.width)))
        cy = min(dims.height - 1, max(0, int((y0 + y1) / 2)))
        grid[cy, cx] = True
    return grid


def shift_mask(mask: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Translate a mask: x wraps around the longitude seam, y fills with 0."""
    out = np.roll(mask, dx, axis=1)
    if dy == 0:
        return out
    shifted = np.zeros_like(out)
    h = out.shape[0]
    if dy > 0:
        if dy < h:
            shifted[dy:] = out[:-dy]
    else:
        if -dy < h:
            shifted[:dy] = out[-dy:]
    return shifted
