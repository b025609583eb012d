import contextlib
import socket
import threading
import time

import numpy as np
import pytest

from scriptfocus import frames as frame_io


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@contextlib.contextmanager
def serve_app(app):
    """Run an ASGI app on a loopback uvicorn server; yields the base URL."""
    import uvicorn

    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    config = uvicorn.Config(app, log_level="warning", lifespan="off")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, kwargs={"sockets": [sock]},
                              daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("test server failed to start")
        time.sleep(0.01)
    try:
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=5)
        sock.close()


def make_frame_files(directory, arrays):
    """Write arrays as frame_%06d.png; returns {index: path}."""
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for i, arr in enumerate(arrays):
        path = directory / frame_io.frame_name(i)
        frame_io.write_frame(path, arr)
        paths[i] = path
    return paths


def random_frames(rng, count, width, height):
    return [
        rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
        for _ in range(count)
    ]


def blob_mask(rng, width, height, blobs=3, max_radius=5):
    """Sparse random mask with a few small discs; always non-empty."""
    mask = np.zeros((height, width), dtype=bool)
    ys, xs = np.mgrid[0:height, 0:width]
    for _ in range(blobs):
        cx = int(rng.integers(0, width))
        cy = int(rng.integers(0, height))
        r = int(rng.integers(1, max_radius + 1))
        dx = np.abs(xs - cx)
        dx = np.minimum(dx, width - dx)  # seam-aware, matches the wrap metric
        mask |= dx * dx + (ys - cy) ** 2 <= r * r
    if not mask.any():
        mask[height // 2, width // 2] = True
    return mask
