"""Equirectangular frame geometry: sphere mapping and wrap-aware distances.

A full equirectangular frame maps longitude to x and latitude to y linearly,
so width is always twice height. The x axis wraps (the longitude seam at
+-180 degrees); the y axis does not. Pole rows are heavily oversampled by
the projection, which is why the distance transform only wraps horizontally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class OutOfFrame(ValueError):
    """Pixel coordinates outside the frame grid."""


class DegenerateBox(ValueError):
    """Box with zero area."""


class EmptyMask(ValueError):
    """Mask with no set pixels."""


@dataclass(frozen=True)
class FrameDims:
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("frame dims must be positive")
        if self.width != 2 * self.height:
            raise ValueError(
                f"equirectangular frames need width == 2*height, got {self.width}x{self.height}"
            )


@dataclass(frozen=True)
class SpherePoint:
    """Latitude/longitude in degrees; lon normalized into [-180, 180)."""

    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        lon = (self.lon + 180.0) % 360.0 - 180.0
        object.__setattr__(self, "lon", lon)


@dataclass(frozen=True)
class BBox:
    """Sub-pixel box, origin top-left, x0 < x1 <= width, y0 < y1 <= height."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise DegenerateBox(f"degenerate box {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)


def pixel_to_sphere(px: tuple[int, int], dims: FrameDims) -> SpherePoint:
    """Sample the center of an integer pixel onto the sphere."""
    x, y = px
    if not (0 <= x < dims.width and 0 <= y < dims.height):
        raise OutOfFrame(f"pixel {px} outside {dims.width}x{dims.height}")
    lon = (x + 0.5) / dims.width * 360.0 - 180.0
    lat = 90.0 - (y + 0.5) / dims.height * 180.0
    return SpherePoint(lat=lat, lon=lon)


def sphere_to_pixel(p: SpherePoint, dims: FrameDims) -> tuple[int, int]:
    """Nearest pixel center to a sphere point, clamped to frame bounds."""
    x = round((p.lon + 180.0) / 360.0 * dims.width - 0.5)
    y = round((90.0 - p.lat) / 180.0 * dims.height - 0.5)
    x = min(dims.width - 1, max(0, int(x)))
    y = min(dims.height - 1, max(0, int(y)))
    return (x, y)


def angular_distance(a: SpherePoint, b: SpherePoint) -> float:
    """Great-circle angle in degrees, haversine form (stable near 0)."""
    la1 = math.radians(a.lat)
    la2 = math.radians(b.lat)
    dlat = la2 - la1
    dlon = math.radians(b.lon - a.lon)
    h = math.sin(dlat / 2.0) ** 2 + math.cos(la1) * math.cos(la2) * math.sin(dlon / 2.0) ** 2
    return math.degrees(2.0 * math.asin(min(1.0, math.sqrt(h))))


def split_wrapped_bbox(
    box_raw: tuple[float, float, float, float], dims: FrameDims
) -> list[BBox]:
    """Split a raw box whose x1 may run past the frame width at the seam.

    Returns one box when it fits, otherwise the two frame-space pieces.
    """
    x0, y0, x1, y1 = box_raw
    if x1 <= x0 or y1 <= y0:
        raise DegenerateBox(f"degenerate box {box_raw}")
    if x1 - x0 > dims.width:
        raise ValueError(f"box wider than frame: {box_raw}")
    if not (0 <= x0 < dims.width) or not (0 <= y0 < y1 <= dims.height):
        raise OutOfFrame(f"box {box_raw} outside {dims.width}x{dims.height}")
    if x1 <= dims.width:
        return [BBox(x0, y0, x1, y1)]
    return [BBox(x0, y0, dims.width, y1), BBox(0.0, y0, x1 - dims.width, y1)]


def wrap_distance_transform(mask: np.ndarray) -> np.ndarray:
    """Distance (in pixels) from each cell to the nearest set cell.

    3-4 chamfer metric (3 per orthogonal step, 4 per diagonal, divided by 3),
    computed over a horizontally triple-tiled copy of the mask so the
    longitude seam behaves as adjacent; the middle band is returned. Costs
    stay integer until the final divide, so the result is bit-identical
    under horizontal rotation of the mask. Vertical (pole) wrap is not
    modeled. Worst-case error vs exact Euclidean distance is about 8%.
    """
    grid = np.asarray(mask)
    if grid.ndim != 2 or grid.size == 0:
        raise ValueError("mask must be a non-empty 2-D grid")
    on = grid != 0
    if not on.any():
        raise EmptyMask("mask has no set pixels")
    h, w = on.shape
    tiled = np.tile(on, (1, 3))
    tw = 3 * w
    big = np.int64(1) << 40
    d = np.where(tiled, np.int64(0), big)
    xs = 3 * np.arange(tw, dtype=np.int64)

    for y in range(h):
        row = d[y]
        if y > 0:
            prev = d[y - 1]
            cand = prev + 3
            shifted = np.empty_like(prev)
            shifted[0] = big
            shifted[1:] = prev[:-1] + 4
            np.minimum(cand, shifted, out=cand)
            shifted[-1] = big
            shifted[:-1] = prev[1:] + 4
            np.minimum(cand, shifted, out=cand)
            np.minimum(row, cand, out=row)
        # left-to-right propagation as a running minimum of (v - 3x) + 3x
        d[y] = np.minimum.accumulate(row - xs) + xs

    for y in range(h - 1, -1, -1):
        row = d[y]
        if y < h - 1:
            nxt = d[y + 1]
            cand = nxt + 3
            shifted = np.empty_like(nxt)
            shifted[0] = big
            shifted[1:] = nxt[:-1] + 4
            np.minimum(cand, shifted, out=cand)
            shifted[-1] = big
            shifted[:-1] = nxt[1:] + 4
            np.minimum(cand, shifted, out=cand)
            np.minimum(row, cand, out=row)
        rev = row[::-1]
        d[y] = (np.minimum.accumulate(rev - xs) + xs)[::-1]

    return d[:, w:2 * w] / 3.0
