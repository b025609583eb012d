"""Frame-sequence I/O: numbered 8-bit RGB PNGs, frame_%06d.png.

Video containers are out of scope by design; demux/mux with any
ffmpeg-compatible tool (see README). Keeping the core on plain image files
keeps runs deterministic and codec-free.
"""

from __future__ import annotations

import hashlib
import io
import os
import re
from pathlib import Path

import numpy as np
from PIL import Image

FRAME_RE = re.compile(r"^frame_(\d{6})\.png$")


def frame_name(index: int) -> str:
    return f"frame_{index:06d}.png"


def list_frames(directory: str | Path) -> list[tuple[int, Path]]:
    """All frame files in a directory, sorted by index."""
    directory = Path(directory)
    if not directory.is_dir():
        return []
    found = []
    for entry in os.listdir(directory):
        m = FRAME_RE.match(entry)
        if m:
            found.append((int(m.group(1)), directory / entry))
    found.sort()
    return found


def read_frame(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def frame_size(path: str | Path) -> tuple[int, int]:
    """(width, height) from the header, without decoding pixels."""
    with Image.open(path) as img:
        return img.size


def write_frame(path: str | Path, pixels: np.ndarray):
    """Atomic PNG write (tmp file + rename) so aborts never leave partials."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    Image.fromarray(pixels, mode="RGB").save(tmp, format="PNG")
    os.replace(tmp, path)


def encode_png(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def pixel_digest(pixels: np.ndarray) -> str:
    """Content hash of decoded pixels (encoder-independent identity)."""
    h = hashlib.sha256()
    h.update(f"{pixels.shape[1]}x{pixels.shape[0]}".encode())
    h.update(np.ascontiguousarray(pixels).tobytes())
    return h.hexdigest()
