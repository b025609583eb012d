"""Attention-script parsing: time-coded cues naming where the viewer should look.

Script files are UTF-8 text (LF or CRLF). Cues are blank-line separated
blocks; lines whose first non-space character is ``#`` are comments:

    # museum scene
    00:00:12.500 --> 00:00:20.000
    prompt: statue next to the staircase
    effect: vignette
    strength: 0.8
    feather: 12 48
    ramp: 500 500

The first line of a block is the time range. The remaining lines are
``key: value`` pairs in any order. ``prompt`` is mandatory; everything else
has defaults. ``feather`` takes inner then outer pixels, ``ramp`` takes
attack then release milliseconds, ``floor`` is the darkest luma multiplier
kept in the periphery, ``id`` overrides the auto-assigned cue id.

Prompts are normalized at parse time: a leading "look at the " phrasing
(case-insensitive, repeated) is stripped so detectors receive a plain noun
phrase.

Cue intervals are half-open: a cue is active for start <= t < end, so two
cues sharing a boundary never double-fire. Overlapping cues are legal and
unlimited; combining their effects is the renderer's concern.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_TIME_RE = re.compile(r"^(?:(\d+):)?([0-5]?\d):([0-5]\d)\.(\d{3})$")
_ID_RE = re.compile(r"^[A-Za-z0-9._-]+$")
_RANGE_SEP = "-->"
_PROMPT_PREFIX = "look at the "

EFFECTS = ("vignette", "desaturate")
_CUE_KEYS = ("prompt", "effect", "strength", "feather", "ramp", "floor", "id")


class MalformedTimecode(ValueError):
    """Timecode text does not match HH:MM:SS.mmm / MM:SS.mmm."""


class MalformedCue(ValueError):
    """A cue block is invalid; carries the 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


@dataclass(frozen=True, order=True)
class Timecode:
    """Milliseconds from video start."""

    millis: int

    def __post_init__(self):
        if self.millis < 0:
            raise MalformedTimecode(f"negative timecode: {self.millis}")


def parse_timecode(text: str) -> Timecode:
    """Parse ``HH:MM:SS.mmm`` or ``MM:SS.mmm``; minutes/seconds must be < 60."""
    m = _TIME_RE.match(text.strip())
    if not m:
        raise MalformedTimecode(f"bad timecode {text!r}")
    hours = int(m.group(1)) if m.group(1) is not None else 0
    minutes = int(m.group(2))
    seconds = int(m.group(3))
    millis = int(m.group(4))
    return Timecode(((hours * 60 + minutes) * 60 + seconds) * 1000 + millis)


def format_timecode(t: Timecode) -> str:
    total, ms = divmod(t.millis, 1000)
    total, s = divmod(total, 60)
    h, m = divmod(total, 60)
    return f"{h:02d}:{m:02d}:{s:02d}.{ms:03d}"


def normalize_prompt(text: str) -> str:
    """Trim and strip leading "look at the " phrasing (repeatedly, so the
    normalization is a fixed point)."""
    p = text.strip()
    while p.lower().startswith(_PROMPT_PREFIX):
        p = p[len(_PROMPT_PREFIX):].lstrip()
    return p


@dataclass(frozen=True)
class Cue:
    id: str
    start: Timecode
    end: Timecode
    prompt: str
    effect: str = "vignette"
    strength: float = 0.8
    feather_inner_px: float = 12.0
    feather_outer_px: float = 48.0
    attack_ms: int = 500
    release_ms: int = 500
    floor_luma: float = 0.15

    def __post_init__(self):
        if not self.id or not _ID_RE.match(self.id):
            raise ValueError(f"bad cue id {self.id!r}")
        if not self.prompt:
            raise ValueError("empty prompt")
        if self.start >= self.end:
            raise ValueError("cue end must be after start")
        if self.effect not in EFFECTS:
            raise ValueError(f"unknown effect {self.effect!r}")
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError(f"strength {self.strength} outside [0, 1]")
        if self.feather_inner_px < 0:
            raise ValueError("feather inner must be >= 0")
        if self.feather_outer_px <= self.feather_inner_px:
            raise ValueError("feather outer must exceed inner")
        if self.attack_ms < 0 or self.release_ms < 0:
            raise ValueError("ramp times must be >= 0")
        if not 0.0 <= self.floor_luma <= 1.0:
            raise ValueError(f"floor {self.floor_luma} outside [0, 1]")


@dataclass(frozen=True)
class Script:
    cues: tuple[Cue, ...]
    source_path: str = field(default="<memory>", compare=False)


def parse_script(text: str, source_path: str = "<memory>") -> Script:
    """Parse script text into a Script with all defaults applied.

    Cues come back sorted by start time (stable on ties, preserving file
    order). Raises MalformedCue with the offending line number on any
    structural or range problem.
    """
    if text.startswith("﻿"):
        text = text[1:]
    lines = text.splitlines()
    cues: list[Cue] = []
    i = 0
    ordinal = 0
    while i < len(lines):
        stripped = lines[i].strip()
        if not stripped or stripped.startswith("#"):
            i += 1
            continue
        block_line = i + 1
        if _RANGE_SEP not in stripped:
            raise MalformedCue(block_line, "expected a time range 'START --> END'")
        left, _, right = stripped.partition(_RANGE_SEP)
        try:
            start = parse_timecode(left)
            end = parse_timecode(right)
        except MalformedTimecode as exc:
            raise MalformedCue(block_line, str(exc)) from exc
        i += 1
        fields: dict[str, str] = {}
        field_lines: dict[str, int] = {}
        while i < len(lines):
            body = lines[i].strip()
            if not body:
                break
            if body.startswith("#"):
                i += 1
                continue
            key, sep, value = body.partition(":")
            key = key.strip().lower()
            if not sep or key not in _CUE_KEYS:
                raise MalformedCue(i + 1, f"unknown key {key!r}")
            if key in fields:
                raise MalformedCue(i + 1, f"duplicate key {key!r}")
            fields[key] = value.strip()
            field_lines[key] = i + 1
            i += 1
        cues.append(_build_cue(start, end, fields, field_lines, block_line, ordinal))
        ordinal += 1
    cues.sort(key=lambda c: c.start.millis)
    return Script(cues=tuple(cues), source_path=source_path)


def _build_cue(start, end, fields, field_lines, block_line, ordinal) -> Cue:
    if "prompt" not in fields:
        raise MalformedCue(block_line, "cue block has no prompt line")
    prompt = normalize_prompt(fields["prompt"])
    if not prompt:
        raise MalformedCue(field_lines["prompt"], "prompt is empty")
    kwargs = {}
    if "effect" in fields:
        kwargs["effect"] = fields["effect"].lower()
    if "strength" in fields:
        kwargs["strength"] = _parse_float(fields["strength"], field_lines["strength"], "strength")
    if "feather" in fields:
        inner, outer = _parse_pair(fields["feather"], field_lines["feather"], "feather", float)
        kwargs["feather_inner_px"] = inner
        kwargs["feather_outer_px"] = outer
    if "ramp" in fields:
        attack, release = _parse_pair(fields["ramp"], field_lines["ramp"], "ramp", int)
        kwargs["attack_ms"] = attack
        kwargs["release_ms"] = release
    if "floor" in fields:
        kwargs["floor_luma"] = _parse_float(fields["floor"], field_lines["floor"], "floor")
    cue_id = fields.get("id", f"cue-{ordinal}")
    try:
        return Cue(id=cue_id, start=start, end=end, prompt=prompt, **kwargs)
    except ValueError as exc:
        raise MalformedCue(block_line, str(exc)) from exc


def _parse_float(value: str, line_no: int, key: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise MalformedCue(line_no, f"{key}: not a number: {value!r}") from exc


def _parse_pair(value: str, line_no: int, key: str, conv):
    parts = value.split()
    if len(parts) != 2:
        raise MalformedCue(line_no, f"{key}: expected two values, got {value!r}")
    try:
        return conv(parts[0]), conv(parts[1])
    except ValueError as exc:
        raise MalformedCue(line_no, f"{key}: not a number: {value!r}") from exc


def format_script(script: Script) -> str:
    """Canonical text form; parse_script(format_script(s)) == s."""
    blocks = []
    for cue in script.cues:
        blocks.append("\n".join([
            f"{format_timecode(cue.start)} --> {format_timecode(cue.end)}",
            f"id: {cue.id}",
            f"prompt: {cue.prompt}",
            f"effect: {cue.effect}",
            f"strength: {cue.strength!r}",
            f"feather: {cue.feather_inner_px!r} {cue.feather_outer_px!r}",
            f"ramp: {cue.attack_ms} {cue.release_ms}",
            f"floor: {cue.floor_luma!r}",
        ]))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def active_cues(script: Script, t: Timecode | int) -> list[Cue]:
    """Every cue with start <= t < end, in script order."""
    millis = t.millis if isinstance(t, Timecode) else int(t)
    return [c for c in script.cues if c.start.millis <= millis < c.end.millis]
