"""Clients for the detect/segment backend, plus the sidecar/fixture codec.

Two interchangeable backends sit behind one wire contract:

* ``RemoteBackend`` talks HTTP to an inference service
  (``POST /v1/detect``, ``POST /v1/segment``, ``GET /v1/health``).
* ``FixtureBackend`` replays a recorded sidecar file deterministically,
  keyed by (frame_index, prompt). One schema serves both caching and
  testing, so every recorded run doubles as a replayable fixture.

The highest-confidence selection rule lives here on the client side: the
backend returns every hit, the client keeps the single best one (score,
then smaller box area, then arrival order).
"""

from __future__ import annotations

import base64
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path

import httpx
import numpy as np

from . import frames
from .geometry import BBox, DegenerateBox, OutOfFrame
from .masks import MaskRLE, MalformedRLE, rle_decode

log = logging.getLogger(__name__)

SIDECAR_VERSION = 1


class BackendUnavailable(RuntimeError):
    """Transport failure or timeout after one retry."""


class BackendError(RuntimeError):
    """Protocol corruption: the backend answered with something malformed."""


class EmptySegmentation(RuntimeError):
    """The segmenter returned a mask with no set pixels."""


class MalformedFixture(ValueError):
    """Sidecar/fixture file cannot be parsed against the schema."""


@dataclass(frozen=True)
class DetectionParams:
    box_threshold: float = 0.3
    text_threshold: float = 0.25

    def __post_init__(self):
        for name, v in (("box_threshold", self.box_threshold),
                        ("text_threshold", self.text_threshold)):
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {v}")


@dataclass(frozen=True)
class Detection:
    box: BBox
    score: float
    phrase: str


@dataclass(frozen=True)
class Frame:
    """A decoded video frame plus its sequence index."""

    index: int
    pixels: np.ndarray = field(compare=False)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])


@dataclass(frozen=True)
class BackendConfig:
    kind: str  # "remote" | "fixture"
    endpoint_url: str = ""
    fixture_path: str = ""
    request_timeout_ms: int = 30000
    max_in_flight: int = 2

    def __post_init__(self):
        if self.kind == "remote":
            if not self.endpoint_url:
                raise ValueError("remote backend needs endpoint_url")
        elif self.kind == "fixture":
            if not self.fixture_path:
                raise ValueError("fixture backend needs fixture_path")
        else:
            raise ValueError(f"unknown backend kind {self.kind!r}")


@dataclass(frozen=True)
class SidecarRecord:
    frame_index: int
    prompt: str
    params: DetectionParams
    detection: Detection | None
    mask: MaskRLE | None
    source: str  # "live" | "fallback_box" | "fixture"
    candidates: tuple[Detection, ...] = ()

    def __post_init__(self):
        if self.detection is None and self.mask is not None:
            raise ValueError("record with a mask but no detection")
        if self.source not in ("live", "fallback_box", "fixture"):
            raise ValueError(f"unknown record source {self.source!r}")


# ---------------------------------------------------------------------------
# selection + client operations


def select_detection(
    candidates: list[Detection], params: DetectionParams
) -> Detection | None:
    """Highest score at or above box_threshold; ties prefer the smaller box,
    then the first-returned. Pure in the response list: permutations only
    matter among exact (score, area) ties."""
    best = None
    best_key = None
    for i, det in enumerate(candidates):
        if det.score < params.box_threshold:
            continue
        key = (-det.score, det.box.area, i)
        if best_key is None or key < best_key:
            best_key = key
            best = det
    return best


def detect_full(
    frame: Frame, prompt: str, params: DetectionParams, backend
) -> tuple[Detection | None, list[Detection]]:
    """Run detection and return (selected, full candidate list)."""
    if frame.pixels.size == 0:
        raise ValueError("empty frame")
    if not prompt.strip():
        raise ValueError("empty prompt")
    candidates = backend.raw_detect(frame, prompt, params)
    return select_detection(candidates, params), candidates


def detect(frame: Frame, prompt: str, params: DetectionParams, backend) -> Detection | None:
    """Best detection for the prompt, or None when nothing qualifies."""
    return detect_full(frame, prompt, params, backend)[0]


def segment(frame: Frame, box: BBox, backend) -> MaskRLE:
    """Segment the box contents; raises EmptySegmentation for all-zero masks
    so the caller can decide on a fallback."""
    if not (0 <= box.x0 < box.x1 <= frame.width and 0 <= box.y0 < box.y1 <= frame.height):
        raise OutOfFrame(f"box {box.as_tuple()} outside {frame.width}x{frame.height}")
    rle = backend.raw_segment(frame, box)
    if rle.ones == 0:
        raise EmptySegmentation(f"no pixels segmented for box {box.as_tuple()}")
    return rle


# ---------------------------------------------------------------------------
# fixture backend (replay)


class FixtureBackend:
    """Deterministic replay of recorded detect/segment results.

    Detect lookups are exact-match on (frame_index, prompt); a miss returns
    no detections and logs a warning. Segment lookups match on frame index
    plus the requested box (the box necessarily came from the paired
    detection). Read-only after load; safe to share across workers.
    """

    kind = "fixture"

    def __init__(self, records: list[SidecarRecord], path: str = "<memory>"):
        self.path = path
        self._detect_index: dict[tuple[int, str], SidecarRecord] = {}
        self._segment_index: dict[tuple[int, tuple], SidecarRecord] = {}
        for rec in records:
            self._detect_index.setdefault((rec.frame_index, rec.prompt), rec)
            if rec.detection is not None:
                key = (rec.frame_index, _box_key(rec.detection.box))
                self._segment_index.setdefault(key, rec)

    def raw_detect(self, frame: Frame, prompt: str, params: DetectionParams) -> list[Detection]:
        rec = self._detect_index.get((frame.index, prompt))
        if rec is None:
            log.warning("fixture %s has no entry for frame %d prompt %r",
                        self.path, frame.index, prompt)
            return []
        if rec.candidates:
            return list(rec.candidates)
        return [rec.detection] if rec.detection is not None else []

    def raw_segment(self, frame: Frame, box: BBox) -> MaskRLE:
        rec = self._segment_index.get((frame.index, _box_key(box)))
        if rec is None or rec.mask is None:
            log.warning("fixture %s has no mask for frame %d box %s",
                        self.path, frame.index, box.as_tuple())
            return MaskRLE(frame.height, frame.width, (frame.height * frame.width,))
        return rec.mask

    def describe(self) -> str:
        return f"fixture:{self.path}"

    def close(self):
        pass


def _box_key(box: BBox) -> tuple:
    return tuple(round(v, 3) for v in box.as_tuple())


def load_fixture(path: str | Path) -> FixtureBackend:
    _params, records = load_sidecar(path)
    return FixtureBackend(records, path=str(path))


# ---------------------------------------------------------------------------
# remote backend


class RemoteBackend:
    """HTTP client for the inference service; retries once on transport
    failure or 503, then raises BackendUnavailable. At most max_in_flight
    requests run concurrently."""

    kind = "live"

    def __init__(self, endpoint_url: str, request_timeout_ms: int = 30000,
                 max_in_flight: int = 2, transport: httpx.BaseTransport | None = None):
        self.endpoint_url = endpoint_url.rstrip("/")
        self._client = httpx.Client(
            base_url=self.endpoint_url,
            timeout=request_timeout_ms / 1000.0,
            transport=transport,
        )
        self._slots = threading.Semaphore(max_in_flight)

    def _post(self, path: str, payload: dict) -> dict:
        last = None
        for attempt in (1, 2):
            try:
                with self._slots:
                    resp = self._client.post(path, json=payload)
            except httpx.TransportError as exc:
                last = exc
                log.warning("transport failure on %s (attempt %d): %s", path, attempt, exc)
                continue
            if resp.status_code == 503:
                last = RuntimeError("service loading (503)")
                log.warning("%s answered 503 (attempt %d)", path, attempt)
                continue
            if resp.status_code != 200:
                raise BackendError(f"{path} answered HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except json.JSONDecodeError as exc:
                raise BackendError(f"{path} returned non-JSON body") from exc
        raise BackendUnavailable(f"{path} unavailable after retry: {last}")

    def raw_detect(self, frame: Frame, prompt: str, params: DetectionParams) -> list[Detection]:
        payload = {
            "image_png_b64": base64.b64encode(frames.encode_png(frame.pixels)).decode("ascii"),
            "prompt": prompt,
            "box_threshold": params.box_threshold,
            "text_threshold": params.text_threshold,
        }
        body = self._post("/v1/detect", payload)
        try:
            return [
                Detection(box=BBox(*[float(v) for v in d["box"]]),
                          score=float(d["score"]), phrase=str(d["phrase"]))
                for d in body["detections"]
            ]
        except (KeyError, TypeError, ValueError, DegenerateBox) as exc:
            raise BackendError(f"malformed detect response: {exc}") from exc

    def raw_segment(self, frame: Frame, box: BBox) -> MaskRLE:
        payload = {
            "image_png_b64": base64.b64encode(frames.encode_png(frame.pixels)).decode("ascii"),
            "box": list(box.as_tuple()),
        }
        body = self._post("/v1/segment", payload)
        try:
            m = body["mask"]
            rle = MaskRLE(height=int(m["height"]), width=int(m["width"]),
                          counts=tuple(int(c) for c in m["counts"]))
            rle_decode(rle)  # validates the contract
            return rle
        except (KeyError, TypeError, ValueError, MalformedRLE) as exc:
            raise BackendError(f"malformed segment response: {exc}") from exc

    def describe(self) -> str:
        return f"remote:{self.endpoint_url}"

    def close(self):
        self._client.close()


def make_backend(config: BackendConfig):
    if config.kind == "fixture":
        return load_fixture(config.fixture_path)
    return RemoteBackend(config.endpoint_url, config.request_timeout_ms,
                         config.max_in_flight)


# ---------------------------------------------------------------------------
# sidecar codec (shared by runs, fixtures, and the replay service)


def _detection_to_json(det: Detection) -> dict:
    return {"box": list(det.box.as_tuple()), "score": det.score, "phrase": det.phrase}


def _detection_from_json(obj) -> Detection:
    try:
        return Detection(box=BBox(*[float(v) for v in obj["box"]]),
                         score=float(obj["score"]), phrase=str(obj["phrase"]))
    except (KeyError, TypeError, ValueError, DegenerateBox) as exc:
        raise MalformedFixture(f"bad detection entry: {obj!r}") from exc


def record_to_json(rec: SidecarRecord) -> dict:
    out = {
        "frame_index": rec.frame_index,
        "prompt": rec.prompt,
        "params": {"box_threshold": rec.params.box_threshold,
                   "text_threshold": rec.params.text_threshold},
        "detection": _detection_to_json(rec.detection) if rec.detection else None,
        "mask": ({"height": rec.mask.height, "width": rec.mask.width,
                  "counts": list(rec.mask.counts)} if rec.mask else None),
        "source": rec.source,
    }
    if rec.candidates:
        out["candidates"] = [_detection_to_json(d) for d in rec.candidates]
    return out


def record_from_json(obj, default_params: DetectionParams) -> SidecarRecord:
    if not isinstance(obj, dict):
        raise MalformedFixture(f"record is not an object: {obj!r}")
    try:
        frame_index = int(obj["frame_index"])
        prompt = str(obj["prompt"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFixture(f"record missing frame_index/prompt: {obj!r}") from exc
    params = default_params
    if isinstance(obj.get("params"), dict):
        try:
            params = DetectionParams(
                box_threshold=float(obj["params"]["box_threshold"]),
                text_threshold=float(obj["params"]["text_threshold"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFixture(f"bad params in record: {obj!r}") from exc
    detection = None
    if obj.get("detection") is not None:
        detection = _detection_from_json(obj["detection"])
    mask = None
    if obj.get("mask") is not None:
        m = obj["mask"]
        try:
            mask = MaskRLE(height=int(m["height"]), width=int(m["width"]),
                           counts=tuple(int(c) for c in m["counts"]))
            rle_decode(mask)
        except (KeyError, TypeError, ValueError, MalformedRLE) as exc:
            raise MalformedFixture(f"bad mask in record for frame {frame_index}") from exc
    candidates = tuple(_detection_from_json(d) for d in obj.get("candidates", []))
    source = obj.get("source", "fixture")
    try:
        return SidecarRecord(frame_index=frame_index, prompt=prompt, params=params,
                             detection=detection, mask=mask, source=source,
                             candidates=candidates)
    except ValueError as exc:
        raise MalformedFixture(str(exc)) from exc


def write_sidecar(records: list[SidecarRecord], path: str | Path,
                  params: DetectionParams | None = None):
    """Atomic JSON write of the run record (also loadable as a fixture)."""
    params = params or DetectionParams()
    doc = {
        "version": SIDECAR_VERSION,
        "params": {"box_threshold": params.box_threshold,
                   "text_threshold": params.text_threshold},
        "records": [record_to_json(r) for r in records],
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    tmp.replace(path)


def load_sidecar(path: str | Path) -> tuple[DetectionParams, list[SidecarRecord]]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedFixture(f"cannot read sidecar {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != SIDECAR_VERSION:
        raise MalformedFixture(
            f"sidecar {path}: version {doc.get('version')!r} != {SIDECAR_VERSION}"
            if isinstance(doc, dict) else f"sidecar {path}: not an object"
        )
    raw_params = doc.get("params") or {}
    try:
        params = DetectionParams(
            box_threshold=float(raw_params.get("box_threshold", 0.3)),
            text_threshold=float(raw_params.get("text_threshold", 0.25)),
        )
    except (TypeError, ValueError) as exc:
        raise MalformedFixture(f"sidecar {path}: bad params") from exc
    records_raw = doc.get("records")
    if not isinstance(records_raw, list):
        raise MalformedFixture(f"sidecar {path}: missing records list")
    records = [record_from_json(obj, params) for obj in records_raw]
    return params, records
