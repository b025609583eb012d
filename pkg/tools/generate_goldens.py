#!/usr/bin/env python3
"""Regenerate the committed golden outputs with the naive reference compositor.

The goldens are the ground truth the pipeline is compared against byte for
byte, so this script deliberately avoids the production pipeline: planning,
tracking replay, distance, feathering, and pixel kernels all come from the
pure-Python reference in tests/oracle.py.

Usage: python3 tools/generate_goldens.py
"""

import hashlib
import json
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

import golden_scenario as gs  # noqa: E402
import oracle  # noqa: E402
from scriptfocus import frames as frame_io  # noqa: E402


def main():
    t0 = time.time()
    gs.DATA_DIR.mkdir(parents=True, exist_ok=True)
    gs.GOLDEN_FRAMES_DIR.mkdir(parents=True, exist_ok=True)
    gs.write_fixture(gs.FIXTURE_PATH)
    print(f"fixture -> {gs.FIXTURE_PATH}")

    with tempfile.TemporaryDirectory() as tmp:
        inputs = gs.make_input_frames(Path(tmp))
        run = oracle.NaiveRun(
            [gs.CUE_A, gs.CUE_B], gs.oracle_fixture(), gs.FPS, gs.N,
            grace=gs.GRACE, alpha=gs.ALPHA, width=gs.W, height=gs.H,
            box_threshold=gs.PARAMS.box_threshold,
        )
        plans = run.run(list(range(gs.FRAME_COUNT)))
        hashes = {}
        for f in range(gs.FRAME_COUNT):
            name = frame_io.frame_name(f)
            dst = gs.GOLDEN_FRAMES_DIR / name
            layers = plans[f]
            if not layers:
                dst.write_bytes(inputs[f].read_bytes())
                print(f"{name}: copied (no effective layer)")
            else:
                pixels = frame_io.read_frame(inputs[f]).tolist()
                composited = oracle.naive_combine(pixels, layers)
                frame_io.write_frame(dst, np.array(composited, dtype=np.uint8))
                print(f"{name}: composited with {len(layers)} layer(s)")
            hashes[name] = hashlib.sha256(dst.read_bytes()).hexdigest()

    manifest = {
        "width": gs.W, "height": gs.H, "fps": gs.FPS,
        "keyframe_interval": gs.N, "frame_count": gs.FRAME_COUNT,
        "sha256": hashes,
    }
    gs.MANIFEST_PATH.write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    print(f"manifest -> {gs.MANIFEST_PATH}")
    print(f"done in {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()
