"""Rendering a target mask as an attention cue.

Pipeline per cue: mask -> wrap-aware distance -> smoothstep feather
(attenuation field) -> temporal envelope -> per-pixel kernel. Fields and
kernels are pure per-pixel math, so results are independent of how work is
split across threads.

Kernels operate on 8-bit sRGB values directly, without linearization: the
effect is stylistic, and integer-exact outputs keep golden tests byte
stable. Rounding is IEEE round-half-to-even throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import wrap_distance_transform
from .script import Cue, Timecode


class DimsMismatch(ValueError):
    """Field and frame dimensions disagree."""


def smoothstep(e0: float, e1: float, x: float) -> float:
    """Hermite ease between edges e0 < e1; clamped outside."""
    if e0 >= e1:
        raise ValueError("smoothstep needs e0 < e1")
    t = (x - e0) / (e1 - e0)
    t = min(max(t, 0.0), 1.0)
    return (3.0 - 2.0 * t) * t * t


def attenuation_field(
    mask: np.ndarray, feather_inner_px: float, feather_outer_px: float
) -> np.ndarray:
    """Per-pixel darkening weight in [0, 1]: 0 on the target, easing to 1
    beyond the outer feather distance."""
    if feather_inner_px < 0 or feather_outer_px <= feather_inner_px:
        raise ValueError("feather edges must satisfy 0 <= inner < outer")
    dist = wrap_distance_transform(mask)  # raises EmptyMask
    t = np.clip((dist - feather_inner_px) / (feather_outer_px - feather_inner_px), 0.0, 1.0)
    return (3.0 - 2.0 * t) * t * t


def envelope(cue: Cue, t: Timecode | float | int) -> float:
    """Effect intensity over time: linear 0->1 attack, plateau at 1, linear
    1->0 release; 0 outside [start, end). When attack+release exceeds the
    cue length, both ramps shrink proportionally and meet at peak 1."""
    tm = float(t.millis) if isinstance(t, Timecode) else float(t)
    start = float(cue.start.millis)
    end = float(cue.end.millis)
    if tm < start or tm >= end:
        return 0.0
    length = end - start
    a = float(cue.attack_ms)
    r = float(cue.release_ms)
    if a + r > length and a + r > 0:
        scale = length / (a + r)
        a *= scale
        r *= scale
    rise = 1.0 if a <= 0 or tm >= start + a else (tm - start) / a
    fall = 1.0 if r <= 0 or tm < end - r else (end - tm) / r
    return min(rise, fall)


def _check_dims(frame: np.ndarray, field: np.ndarray):
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise DimsMismatch(f"expected HxWx3 frame, got {frame.shape}")
    if field.shape != frame.shape[:2]:
        raise DimsMismatch(f"field {field.shape} vs frame {frame.shape[:2]}")


def apply_vignette(
    frame: np.ndarray,
    field: np.ndarray,
    strength: float,
    floor_luma: float,
    e: float,
) -> np.ndarray:
    """Darken the periphery: multiplier 1 - a*strength*e*(1 - floor_luma),
    which never drops below floor_luma. Darkening only."""
    _check_dims(frame, field)
    w = strength * e * (1.0 - floor_luma)
    m = 1.0 - field * w
    return np.rint(frame.astype(np.float64) * m[..., None]).astype(np.uint8)


def apply_desaturate(
    frame: np.ndarray, field: np.ndarray, strength: float, e: float
) -> np.ndarray:
    """Pull periphery toward its Rec.709 luma by weight a*strength*e."""
    _check_dims(frame, field)
    f = frame.astype(np.float64)
    gray = np.rint(0.2126 * f[..., 0] + 0.7152 * f[..., 1] + 0.0722 * f[..., 2])
    w = (field * strength * e)[..., None]
    return np.rint(f + (gray[..., None] - f) * w).astype(np.uint8)


@dataclass(frozen=True)
class CueLayer:
    """One cue's contribution to a frame."""

    field: np.ndarray
    strength: float
    floor_luma: float
    e: float
    effect: str = "vignette"


def combine_cues(frame: np.ndarray, layers: list[CueLayer]) -> np.ndarray:
    """Composite simultaneous cues.

    Vignette layers combine through the per-pixel MAX of their multipliers
    (a pixel inside any target stays bright), applied once; desaturation
    layers are then applied sequentially in the given order.
    """
    if not layers:
        raise ValueError("combine_cues needs at least one layer")
    for layer in layers:
        _check_dims(frame, layer.field)
    out = frame
    multiplier = None
    for layer in layers:
        if layer.effect != "vignette":
            continue
        w = layer.strength * layer.e * (1.0 - layer.floor_luma)
        m = 1.0 - layer.field * w
        multiplier = m if multiplier is None else np.maximum(multiplier, m)
    if multiplier is not None:
        out = np.rint(out.astype(np.float64) * multiplier[..., None]).astype(np.uint8)
    for layer in layers:
        if layer.effect == "desaturate":
            out = apply_desaturate(out, layer.field, layer.strength, layer.e)
    return out
