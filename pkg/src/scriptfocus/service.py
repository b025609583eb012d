"""HTTP replay service for the detect/segment wire protocol.

Serves recorded sidecar/fixture results over the same endpoints a live
inference service exposes, so the remote client path can be exercised (and
demos run) without any models:

* ``POST /v1/detect``  {image_png_b64, prompt, box_threshold, text_threshold}
* ``POST /v1/segment`` {image_png_b64, box}
* ``GET  /v1/health``

Incoming images are matched to recorded frames by decoded-pixel hash, so
any lossless re-encoding of a frame still replays correctly. Unknown images
or prompts answer with no detections; unknown boxes answer with an all-zero
mask (the client surfaces that as an empty segmentation). Malformed bodies
get 422, oversized images 413, and everything answers 503 until the fixture
is loaded.
"""

from __future__ import annotations

import base64
import binascii
import logging
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import frames as frame_io
from .backends import SidecarRecord, load_sidecar
from .geometry import BBox, DegenerateBox

log = logging.getLogger(__name__)

MAX_IMAGE_SIDE = 4096


class DetectRequest(BaseModel):
    image_png_b64: str
    prompt: str = Field(min_length=1)
    box_threshold: float = Field(default=0.3, gt=0.0, lt=1.0)
    text_threshold: float = Field(default=0.25, gt=0.0, lt=1.0)


class DetectionModel(BaseModel):
    box: tuple[float, float, float, float]
    score: float
    phrase: str


class DetectResponse(BaseModel):
    detections: list[DetectionModel]


class SegmentRequest(BaseModel):
    image_png_b64: str
    box: tuple[float, float, float, float]


class MaskModel(BaseModel):
    height: int
    width: int
    counts: list[int]


class SegmentResponse(BaseModel):
    mask: MaskModel


class HealthResponse(BaseModel):
    status: str
    detector: str
    segmenter: str


class ReplayIndex:
    """Recorded results keyed for wire lookups."""

    def __init__(self, records: list[SidecarRecord], frames_dir: str | Path):
        self.by_prompt: dict[tuple[int, str], SidecarRecord] = {}
        self.by_box: dict[tuple[int, tuple], SidecarRecord] = {}
        for rec in records:
            self.by_prompt.setdefault((rec.frame_index, rec.prompt), rec)
            if rec.detection is not None:
                key = (rec.frame_index, _box_key(rec.detection.box.as_tuple()))
                self.by_box.setdefault(key, rec)
        self.digest_to_index: dict[str, int] = {}
        for idx, path in frame_io.list_frames(frames_dir):
            self.digest_to_index[frame_io.pixel_digest(frame_io.read_frame(path))] = idx

    def frame_index(self, pixels: np.ndarray) -> int | None:
        return self.digest_to_index.get(frame_io.pixel_digest(pixels))


def _box_key(box) -> tuple:
    return tuple(round(float(v), 3) for v in box)


def _decode_image(b64: str, max_side: int) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError):
        raise HTTPException(status_code=422, detail="image_png_b64 is not valid base64")
    try:
        pixels = frame_io.decode_png(raw)
    except Exception:
        raise HTTPException(status_code=422, detail="image_png_b64 is not a decodable PNG")
    h, w = pixels.shape[:2]
    if max(h, w) > max_side:
        raise HTTPException(status_code=413, detail=f"image side exceeds {max_side}")
    return pixels


def create_app(
    fixture_path: str | Path,
    frames_dir: str | Path,
    max_side: int = MAX_IMAGE_SIDE,
    eager: bool = True,
) -> FastAPI:
    app = FastAPI(title="scriptfocus replay service")
    app.state.replay = None
    app.state.ids = ("fixture-replay", "fixture-replay")

    def _load():
        _params, records = load_sidecar(fixture_path)
        app.state.replay = ReplayIndex(records, frames_dir)
        log.info("replay service loaded %d records, %d frames from %s",
                 len(records), len(app.state.replay.digest_to_index), fixture_path)

    app.state.load = _load
    if eager:
        _load()

    def _replay() -> ReplayIndex:
        if app.state.replay is None:
            raise HTTPException(status_code=503, detail="fixture still loading")
        return app.state.replay

    @app.exception_handler(DegenerateBox)
    async def _degenerate(request: Request, exc: DegenerateBox):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/v1/health", response_model=HealthResponse)
    def health():
        _replay()
        detector, segmenter = app.state.ids
        return HealthResponse(status="ok", detector=detector, segmenter=segmenter)

    @app.post("/v1/detect", response_model=DetectResponse)
    def handle_detect(req: DetectRequest):
        replay = _replay()
        pixels = _decode_image(req.image_png_b64, max_side)
        idx = replay.frame_index(pixels)
        if idx is None:
            log.warning("detect: unknown image (no recorded frame matches)")
            return DetectResponse(detections=[])
        rec = replay.by_prompt.get((idx, req.prompt))
        if rec is None:
            log.warning("detect: no record for frame %d prompt %r", idx, req.prompt)
            return DetectResponse(detections=[])
        candidates = list(rec.candidates) if rec.candidates else (
            [rec.detection] if rec.detection is not None else []
        )
        hits = [
            DetectionModel(box=d.box.as_tuple(), score=d.score, phrase=d.phrase)
            for d in candidates
            if d.score >= req.box_threshold
        ]
        return DetectResponse(detections=hits)

    @app.post("/v1/segment", response_model=SegmentResponse)
    def handle_segment(req: SegmentRequest):
        replay = _replay()
        pixels = _decode_image(req.image_png_b64, max_side)
        h, w = pixels.shape[:2]
        box = BBox(*req.box)  # DegenerateBox -> 422 via handler
        if not (0 <= box.x0 < box.x1 <= w and 0 <= box.y0 < box.y1 <= h):
            raise HTTPException(status_code=422, detail="box outside image bounds")
        idx = replay.frame_index(pixels)
        rec = replay.by_box.get((idx, _box_key(req.box))) if idx is not None else None
        if rec is not None and rec.mask is not None:
            mask = MaskModel(height=rec.mask.height, width=rec.mask.width,
                             counts=list(rec.mask.counts))
        else:
            log.warning("segment: no recorded mask for box %s", req.box)
            mask = MaskModel(height=h, width=w, counts=[h * w])
        return SegmentResponse(mask=mask)

    return app


def serve(fixture_path: str, frames_dir: str, host: str = "127.0.0.1",
          port: int = 8787):
    import uvicorn

    uvicorn.run(create_app(fixture_path, frames_dir), host=host, port=port,
                log_level="info")
