"""Run orchestration: keyframe planning, region tracking, compositing.

A run has two phases. The keyframe phase walks each cue's planned keyframes
in frame order, querying the backend (or replaying a cached sidecar) and
updating one RegionState per cue: detection feeds segmentation, empty
segmentations fall back to a filled detection box, misses are tolerated for
a grace period (held) before the cue goes lost. The compositing phase then
renders every frame independently, which makes it safe to parallelize: all
tracking state is settled before the first pixel is touched, so output is
bit-identical for any worker count.

Between keyframes the latest mask is carried forward (zero-order hold),
translated by the rounded offset between the EMA-smoothed center and the
mask's own anchor; the horizontal component wraps around the seam.

Frames where every layer is provably identity (envelope or strength zero,
or an all-zero attenuation field) are copied byte-for-byte from the input,
as are frames with no active cue.
"""

from __future__ import annotations

import logging
import math
import os
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import frames as frame_io
from .backends import (
    BackendConfig,
    BackendUnavailable,
    DetectionParams,
    Detection,
    EmptySegmentation,
    Frame,
    MalformedFixture,
    SidecarRecord,
    detect_full,
    load_sidecar,
    make_backend,
    segment,
    write_sidecar,
)
from .effects import CueLayer, attenuation_field, combine_cues, envelope
from .geometry import FrameDims
from .masks import MaskRLE, mask_from_box, rle_decode, rle_encode, shift_mask
from .script import Cue, Script

log = logging.getLogger(__name__)

__all__ = [
    "EmptySpan", "InputMissing", "DimsInconsistent",
    "RegionState", "RunConfig", "RunSummary",
    "plan_keyframes", "step_keyframe", "region_for_frame",
    "run_detection", "process_video", "write_sidecar", "load_sidecar",
]


class EmptySpan(ValueError):
    """Cue interval shorter than one frame."""


class InputMissing(FileNotFoundError):
    """No input frames found."""


class DimsInconsistent(ValueError):
    """Input frames disagree in size, or width != 2*height."""


@dataclass(frozen=True)
class RegionState:
    cue_id: str
    status: str  # "active" | "held" | "lost"
    detection: Detection | None = None
    mask: MaskRLE | None = None
    mask_anchor: tuple[float, float] | None = None
    smoothed_center: tuple[float, float] | None = None
    held_keyframes: int = 0


@dataclass
class RunConfig:
    frames_dir: str
    out_dir: str
    fps: float
    keyframe_interval: int = 15
    grace_keyframes: int = 2
    ema_alpha: float = 0.5
    params: DetectionParams = field(default_factory=DetectionParams)
    backend: object = None  # BackendConfig or a ready backend handle
    workers: int | None = None
    effect_override: str | None = None
    reuse_sidecar: str | None = None
    sidecar_name: str = "sidecar.json"

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError("fps must be > 0")
        if self.keyframe_interval < 1:
            raise ValueError("keyframe interval must be >= 1")
        if not 0.0 < self.ema_alpha <= 1.0:
            raise ValueError("ema_alpha must be in (0, 1]")


@dataclass
class RunSummary:
    frames_total: int = 0
    frames_rendered: int = 0
    frames_copied: int = 0
    frames_existing: int = 0
    keyframes_active: int = 0
    keyframes_held: int = 0
    keyframes_lost: int = 0
    cues_skipped: int = 0
    backend_calls: int = 0
    elapsed_s: float = 0.0
    sidecar_path: str = ""


def frame_time_ms(frame_index: int, fps: float) -> float:
    return frame_index * 1000.0 / fps


def plan_keyframes(cue: Cue, fps: float, n: int) -> list[int]:
    """Frames at which the backend is queried for this cue: the first active
    frame, then every n frames, plus the last active frame."""
    if fps <= 0 or n < 1:
        raise ValueError("need fps > 0 and n >= 1")
    f0 = math.ceil(cue.start.millis * fps / 1000.0)
    f1 = math.ceil(cue.end.millis * fps / 1000.0) - 1
    if f1 < f0:
        raise EmptySpan(f"cue {cue.id} spans no frames at {fps} fps")
    ks = list(range(f0, f1 + 1, n))
    if ks[-1] != f1:
        ks.append(f1)
    return ks


def step_keyframe(
    state: RegionState | None,
    frame: Frame,
    cue: Cue,
    backend,
    params: DetectionParams,
    grace_keyframes: int = 2,
    ema_alpha: float = 0.5,
) -> tuple[RegionState, SidecarRecord]:
    """Advance one cue's tracking state at one of its keyframes."""
    candidates: list[Detection] = []
    chosen = None
    mask = None
    source = backend.kind
    try:
        chosen, candidates = detect_full(frame, cue.prompt, params, backend)
        if chosen is not None:
            try:
                mask = segment(frame, chosen.box, backend)
            except EmptySegmentation:
                dims = FrameDims(frame.width, frame.height)
                mask = rle_encode(mask_from_box(chosen.box.as_tuple(), dims))
                source = "fallback_box"
                log.info("cue %s frame %d: empty segmentation, filling detection box",
                         cue.id, frame.index)
    except BackendUnavailable:
        log.warning("cue %s frame %d: backend unavailable, treating as a miss",
                    cue.id, frame.index)
        chosen = None
        mask = None

    if chosen is None:
        new_state = _miss(state, cue, grace_keyframes)
        record = SidecarRecord(
            frame_index=frame.index, prompt=cue.prompt, params=params,
            detection=None, mask=None, source=backend.kind,
            candidates=tuple(candidates),
        )
        return new_state, record

    new_state = _accept(state, cue, chosen, mask, ema_alpha, frame.width)
    record = SidecarRecord(
        frame_index=frame.index, prompt=cue.prompt, params=params,
        detection=chosen, mask=mask, source=source, candidates=tuple(candidates),
    )
    return new_state, record


class _BackendProbe:
    """Forwarding wrapper that counts successes and unavailability, so a run
    can tell a dead endpoint (abort) from transient misses (grace)."""

    def __init__(self, inner):
        self.inner = inner
        self.kind = inner.kind
        self.successes = 0
        self.unavailable = 0

    def _call(self, fn, *args):
        try:
            result = fn(*args)
        except BackendUnavailable:
            self.unavailable += 1
            raise
        self.successes += 1
        return result

    def raw_detect(self, frame, prompt, params):
        return self._call(self.inner.raw_detect, frame, prompt, params)

    def raw_segment(self, frame, box):
        return self._call(self.inner.raw_segment, frame, box)

    def describe(self):
        return self.inner.describe()


def _miss(state: RegionState | None, cue: Cue, grace: int) -> RegionState:
    held = (state.held_keyframes if state else 0) + 1
    status = "held" if held <= grace else "lost"
    if state is None:
        return RegionState(cue_id=cue.id, status=status, held_keyframes=held)
    return replace(state, status=status, held_keyframes=held)


def _accept(state, cue, detection, mask, alpha, width) -> RegionState:
    center = detection.box.center
    if state is None or state.smoothed_center is None:
        smoothed = center
    else:
        smoothed = _ema_wrap(state.smoothed_center, center, alpha, width)
    return RegionState(
        cue_id=cue.id, status="active", detection=detection, mask=mask,
        mask_anchor=center, smoothed_center=smoothed, held_keyframes=0,
    )


def _ema_wrap(old, new, alpha, width):
    # move the new x onto its wrap-nearest representative before blending
    ox, oy = old
    nx, ny = new
    dx = nx - ox
    dx -= round(dx / width) * width
    sx = (ox + alpha * dx) % width
    sy = oy + alpha * (ny - oy)
    return (sx, sy)


def _replay_step(state, record, cue, grace, alpha, width):
    """Reproduce step_keyframe transitions from a cached record."""
    if record.detection is None:
        return _miss(state, cue, grace)
    mask = record.mask
    if mask is None or mask.ones == 0:
        dims = FrameDims(width, int(width / 2))
        mask = rle_encode(mask_from_box(record.detection.box.as_tuple(), dims))
    return _accept(state, cue, record.detection, mask, alpha, width)


def region_for_frame(state: RegionState, frame_index: int):
    """The mask to render at frame_index, given the state from the most
    recent keyframe at or before it: the held mask translated by the rounded
    smoothed-center offset (x wraps). None when the cue is lost."""
    if state.status == "lost" or state.mask is None:
        return None
    dx = int(round(state.smoothed_center[0] - state.mask_anchor[0]))
    dy = int(round(state.smoothed_center[1] - state.mask_anchor[1]))
    shifted = shift_mask(rle_decode(state.mask), dx, dy)
    return shifted, state.smoothed_center


# ---------------------------------------------------------------------------
# phases


@dataclass
class _KeyframePhase:
    records: list[SidecarRecord]
    snapshots: dict[str, list[tuple[int, RegionState]]]
    plans: dict[str, list[int]]
    summary: RunSummary


def _discover_frames(frames_dir: str) -> tuple[list[tuple[int, Path]], FrameDims]:
    found = frame_io.list_frames(frames_dir)
    if not found:
        raise InputMissing(f"no frame_NNNNNN.png files in {frames_dir}")
    sizes = {frame_io.frame_size(path) for _, path in found}
    if len(sizes) != 1:
        raise DimsInconsistent(f"mixed frame sizes in {frames_dir}: {sorted(sizes)}")
    (w, h) = next(iter(sizes))
    try:
        dims = FrameDims(w, h)
    except ValueError as exc:
        raise DimsInconsistent(str(exc)) from exc
    return found, dims


def _resolve_backend(config: RunConfig):
    if config.backend is None:
        raise ValueError("run config has no backend")
    if isinstance(config.backend, BackendConfig):
        return make_backend(config.backend), True
    return config.backend, False


def _load_cache(config: RunConfig, sidecar_path: Path):
    cache: dict[tuple[int, str], SidecarRecord] = {}
    if config.reuse_sidecar:
        _, records = load_sidecar(config.reuse_sidecar)
        for rec in records:
            cache.setdefault((rec.frame_index, rec.prompt), rec)
    elif sidecar_path.exists():
        try:
            _, records = load_sidecar(sidecar_path)
        except MalformedFixture:
            log.warning("ignoring unreadable partial sidecar %s", sidecar_path)
            records = []
        for rec in records:
            cache.setdefault((rec.frame_index, rec.prompt), rec)
        if records:
            log.info("resuming: %d cached keyframe records", len(records))
    return cache


def _keyframe_phase(
    script: Script,
    frame_paths: dict[int, Path],
    dims: FrameDims,
    config: RunConfig,
    backend,
    cache: dict[tuple[int, str], SidecarRecord],
    sidecar_path: Path,
) -> _KeyframePhase:
    summary = RunSummary()
    plans: dict[str, list[int]] = {}
    for cue in script.cues:
        try:
            ks = plan_keyframes(cue, config.fps, config.keyframe_interval)
        except EmptySpan:
            log.warning("cue %s spans no frames, skipping", cue.id)
            summary.cues_skipped += 1
            continue
        clamped = [k for k in ks if k in frame_paths]
        if len(clamped) != len(ks):
            log.warning("cue %s: %d keyframes beyond available frames clamped",
                        cue.id, len(ks) - len(clamped))
        if not clamped:
            summary.cues_skipped += 1
            continue
        plans[cue.id] = clamped

    events: dict[int, list[Cue]] = {}
    for cue in script.cues:
        for k in plans.get(cue.id, []):
            events.setdefault(k, []).append(cue)

    states: dict[str, RegionState | None] = {c.id: None for c in script.cues}
    snapshots: dict[str, list[tuple[int, RegionState]]] = {c.id: [] for c in script.cues}
    records: list[SidecarRecord] = []
    allow_backend = config.reuse_sidecar is None
    probe = _BackendProbe(backend)

    def _flush():
        write_sidecar(records, sidecar_path, config.params)

    for kf in sorted(events):
        loaded: Frame | None = None
        for cue in events[kf]:
            key = (kf, cue.prompt)
            if key in cache:
                rec = cache[key]
                state = _replay_step(states[cue.id], rec, cue,
                                     config.grace_keyframes, config.ema_alpha,
                                     dims.width)
            elif not allow_backend:
                log.warning("reuse-sidecar has no record for frame %d prompt %r; "
                            "treating as a miss", kf, cue.prompt)
                rec = SidecarRecord(frame_index=kf, prompt=cue.prompt,
                                    params=config.params, detection=None,
                                    mask=None, source="fixture")
                state = _miss(states[cue.id], cue, config.grace_keyframes)
            else:
                if loaded is None:
                    loaded = Frame(index=kf, pixels=frame_io.read_frame(frame_paths[kf]))
                summary.backend_calls += 1
                state, rec = step_keyframe(
                    states[cue.id], loaded, cue, probe, config.params,
                    config.grace_keyframes, config.ema_alpha,
                )
                cache[key] = rec
            states[cue.id] = state
            snapshots[cue.id].append((kf, state))
            records.append(rec)
            if state.status == "active":
                summary.keyframes_active += 1
            elif state.status == "held":
                summary.keyframes_held += 1
            else:
                summary.keyframes_lost += 1
        _flush()

    if probe.unavailable and not probe.successes:
        raise BackendUnavailable(
            f"backend {backend.describe()} unreachable for every keyframe; "
            f"partial records preserved at {sidecar_path}"
        )
    summary.sidecar_path = str(sidecar_path)
    return _KeyframePhase(records=records, snapshots=snapshots, plans=plans,
                          summary=summary)


def run_detection(config: RunConfig, script: Script, sidecar_path: str | Path) -> RunSummary:
    """Keyframe detection/segmentation only; writes the sidecar, renders nothing."""
    found, dims = _discover_frames(config.frames_dir)
    frame_paths = dict(found)
    backend, created = _resolve_backend(config)
    sidecar_path = Path(sidecar_path)
    sidecar_path.parent.mkdir(parents=True, exist_ok=True)
    try:
        phase = _keyframe_phase(script, frame_paths, dims, config, backend,
                                _load_cache(config, sidecar_path), sidecar_path)
    finally:
        if created:
            backend.close()
    phase.summary.frames_total = len(found)
    return phase.summary


@dataclass
class _Interval:
    lo: int
    hi: int  # exclusive
    field: np.ndarray | None  # None when nothing renders


def _build_intervals(cue: Cue, snaps, f1: int) -> list[_Interval]:
    out = []
    for i, (kf, state) in enumerate(snaps):
        hi = snaps[i + 1][0] if i + 1 < len(snaps) else f1 + 1
        region = region_for_frame(state, kf)
        if region is None:
            out.append(_Interval(kf, hi, None))
            continue
        shifted, _center = region
        if not shifted.any():
            log.warning("cue %s: mask shifted fully out of frame near frame %d",
                        cue.id, kf)
            out.append(_Interval(kf, hi, None))
            continue
        out.append(_Interval(
            kf, hi, attenuation_field(shifted, cue.feather_inner_px, cue.feather_outer_px)
        ))
    return out


def _frame_layers(script, plans, snapshots, config, max_frame) -> dict[int, list[CueLayer]]:
    layers: dict[int, list[CueLayer]] = {}
    for cue in script.cues:
        ks = plans.get(cue.id)
        if not ks:
            continue
        f1 = math.ceil(cue.end.millis * config.fps / 1000.0) - 1
        f1 = min(f1, max_frame)
        intervals = _build_intervals(cue, snapshots[cue.id], f1)
        effect = config.effect_override or cue.effect
        for iv in intervals:
            if iv.field is None:
                continue
            fmax = float(iv.field.max())
            for f in range(iv.lo, min(iv.hi, f1 + 1)):
                e = envelope(cue, frame_time_ms(f, config.fps))
                if effect == "vignette":
                    weight = cue.strength * e * (1.0 - cue.floor_luma)
                else:
                    weight = cue.strength * e
                if weight == 0.0 or fmax == 0.0:
                    continue  # provably identity; frame can stay a byte copy
                layers.setdefault(f, []).append(CueLayer(
                    field=iv.field, strength=cue.strength,
                    floor_luma=cue.floor_luma, e=e, effect=effect,
                ))
    return layers


def _render_one(src: Path, layers: list[CueLayer]) -> np.ndarray:
    return combine_cues(frame_io.read_frame(src), layers)


def process_video(config: RunConfig, script: Script) -> RunSummary:
    """Full run: keyframe phase, then deterministic parallel compositing.

    Output frames use the input naming in config.out_dir. Frames without an
    effective layer are byte-identical copies; already-present outputs are
    kept (resume). The sidecar lands next to the outputs and can be replayed
    with reuse_sidecar for a zero-backend rerun.
    """
    t_start = time.monotonic()
    found, dims = _discover_frames(config.frames_dir)
    frame_paths = dict(found)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sidecar_path = out_dir / config.sidecar_name

    backend, created = _resolve_backend(config)
    try:
        phase = _keyframe_phase(script, frame_paths, dims, config, backend,
                                _load_cache(config, sidecar_path), sidecar_path)
    finally:
        if created:
            backend.close()

    summary = phase.summary
    summary.frames_total = len(found)
    layers = _frame_layers(script, phase.plans, phase.snapshots, config,
                           max(frame_paths))

    workers = config.workers or os.cpu_count() or 1
    indices = [idx for idx, _ in found]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {}
        for idx in indices:
            if idx in layers and not (out_dir / frame_io.frame_name(idx)).exists():
                futures[idx] = pool.submit(_render_one, frame_paths[idx], layers[idx])
        for idx in indices:  # writer runs in index order
            dst = out_dir / frame_io.frame_name(idx)
            if dst.exists():
                summary.frames_existing += 1
                continue
            if idx in futures:
                frame_io.write_frame(dst, futures[idx].result())
                summary.frames_rendered += 1
            else:
                shutil.copyfile(frame_paths[idx], dst)
                summary.frames_copied += 1

    summary.elapsed_s = time.monotonic() - t_start
    return summary
