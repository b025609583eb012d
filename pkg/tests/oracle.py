"""Independent reference implementations used as test oracles.

Everything in here is deliberately naive: plain Python loops, scalar math,
no vectorization, no imports from the production modules except file I/O
plumbing in the end-to-end compositor. The formulas follow the documented
contracts (smoothstep shape, vignette multiplier, 3-4 chamfer weights,
envelope ramps), written in the same operation order so exact-equality
comparisons against the fast kernels are meaningful in IEEE doubles.
"""

from __future__ import annotations

import math

INF = 10**9


# ---------------------------------------------------------------------------
# distances


def exact_wrap_distance(mask):
    """Brute-force nearest-set-pixel Euclidean distance with horizontal wrap.

    O(pixels * set-pixels); only usable on small grids.
    """
    h = len(mask)
    w = len(mask[0])
    setpx = [(x, y) for y in range(h) for x in range(w) if mask[y][x]]
    if not setpx:
        raise ValueError("mask has no set pixels")
    out = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            best = float("inf")
            for sx, sy in setpx:
                dx = abs(x - sx)
                dx = min(dx, w - dx)
                dy = y - sy
                d = math.sqrt(dx * dx + dy * dy)
                if d < best:
                    best = d
            out[y][x] = best
    return out


def exact_wrap_distance_grid(mask):
    """Same exhaustive nearest-set-pixel metric as exact_wrap_distance, but
    vectorized with numpy so acceptance-scale grids stay fast. Still brute
    force: every pixel is compared against every set pixel."""
    import numpy as np

    grid = np.asarray(mask, dtype=bool)
    h, w = grid.shape
    sy, sx = np.nonzero(grid)
    if sx.size == 0:
        raise ValueError("mask has no set pixels")
    ys, xs = np.mgrid[0:h, 0:w]
    dx = np.abs(xs.reshape(-1, 1) - sx.reshape(1, -1))
    dx = np.minimum(dx, w - dx)
    dy = ys.reshape(-1, 1) - sy.reshape(1, -1)
    d = np.sqrt(dx.astype(float) ** 2 + dy.astype(float) ** 2)
    return d.min(axis=1).reshape(h, w)


def naive_chamfer_wrap(mask):
    """Two-pass 3-4 chamfer over a horizontally triple-tiled mask.

    Pure-Python scans; integer costs until the final divide by 3 so results
    can be compared bit-for-bit against a vectorized implementation.
    """
    h = len(mask)
    w = len(mask[0])
    tw = 3 * w
    d = [[0 if mask[y][x % w] else INF for x in range(tw)] for y in range(h)]
    for y in range(h):
        row = d[y]
        above = d[y - 1] if y > 0 else None
        for x in range(tw):
            v = row[x]
            if x > 0 and row[x - 1] + 3 < v:
                v = row[x - 1] + 3
            if above is not None:
                if above[x] + 3 < v:
                    v = above[x] + 3
                if x > 0 and above[x - 1] + 4 < v:
                    v = above[x - 1] + 4
                if x < tw - 1 and above[x + 1] + 4 < v:
                    v = above[x + 1] + 4
            row[x] = v
    for y in range(h - 1, -1, -1):
        row = d[y]
        below = d[y + 1] if y < h - 1 else None
        for x in range(tw - 1, -1, -1):
            v = row[x]
            if x < tw - 1 and row[x + 1] + 3 < v:
                v = row[x + 1] + 3
            if below is not None:
                if below[x] + 3 < v:
                    v = below[x] + 3
                if x < tw - 1 and below[x + 1] + 4 < v:
                    v = below[x + 1] + 4
                if x > 0 and below[x - 1] + 4 < v:
                    v = below[x - 1] + 4
            row[x] = v
    return [[d[y][w + x] / 3.0 for x in range(w)] for y in range(h)]


# ---------------------------------------------------------------------------
# scalar effect math


def smoothstep(e0, e1, x):
    t = (x - e0) / (e1 - e0)
    t = min(max(t, 0.0), 1.0)
    return (3.0 - 2.0 * t) * t * t


def attenuation(dist, inner, outer):
    return [[smoothstep(inner, outer, v) for v in row] for row in dist]


def vignette_pixel(channel, a, strength, floor_luma, e):
    w = strength * e * (1.0 - floor_luma)
    m = 1.0 - a * w
    return int(round(channel * m))


def naive_vignette(frame, field, strength, floor_luma, e):
    """frame: H x W x 3 nested lists of ints. Returns same shape."""
    h = len(frame)
    w = len(frame[0])
    out = []
    for y in range(h):
        row = []
        for x in range(w):
            a = field[y][x]
            row.append(
                [vignette_pixel(frame[y][x][c], a, strength, floor_luma, e) for c in range(3)]
            )
        out.append(row)
    return out


def desaturate_pixel(rgb, a, strength, e):
    gray = round(0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2])
    w = a * strength * e
    return [int(round(c + (gray - c) * w)) for c in rgb]


def naive_desaturate(frame, field, strength, e):
    h = len(frame)
    w = len(frame[0])
    out = []
    for y in range(h):
        row = []
        for x in range(w):
            row.append(desaturate_pixel(frame[y][x], field[y][x], strength, e))
        out.append(row)
    return out


def naive_combine(frame, layers):
    """layers: list of (field, strength, floor_luma, e, effect).

    Vignette layers share one max-multiplier pass; desaturation layers are
    applied afterwards in the given order.
    """
    h = len(frame)
    w = len(frame[0])
    out = [[list(px) for px in row] for row in frame]
    vignettes = [l for l in layers if l[4] == "vignette"]
    if vignettes:
        for y in range(h):
            for x in range(w):
                m = None
                for field, strength, floor_luma, e, _ in vignettes:
                    wgt = strength * e * (1.0 - floor_luma)
                    mi = 1.0 - field[y][x] * wgt
                    m = mi if m is None else max(m, mi)
                out[y][x] = [int(round(c * m)) for c in out[y][x]]
    for field, strength, _floor, e, effect in layers:
        if effect != "desaturate":
            continue
        out = naive_desaturate(out, field, strength, e)
    return out


def envelope(start_ms, end_ms, attack_ms, release_ms, t_ms):
    if t_ms < start_ms or t_ms >= end_ms:
        return 0.0
    length = end_ms - start_ms
    a = float(attack_ms)
    r = float(release_ms)
    if a + r > length and a + r > 0:
        scale = length / (a + r)
        a *= scale
        r *= scale
    rise = 1.0 if a <= 0 or t_ms >= start_ms + a else (t_ms - start_ms) / a
    fall = 1.0 if r <= 0 or t_ms < end_ms - r else (end_ms - t_ms) / r
    return min(rise, fall)


# ---------------------------------------------------------------------------
# end-to-end naive compositor


def select_detection(cands, box_threshold):
    """cands: list of (box, score). Highest score, tie -> smaller area, then order."""
    best = None
    best_key = None
    for i, (box, score) in enumerate(cands):
        if score < box_threshold:
            continue
        x0, y0, x1, y1 = box
        area = (x1 - x0) * (y1 - y0)
        key = (-score, area, i)
        if best_key is None or key < best_key:
            best_key = key
            best = (box, score)
    return best


def box_fill_mask(box, w, h):
    """Pixels whose centers fall inside [x0,x1) x [y0,y1); at least one pixel."""
    x0, y0, x1, y1 = box
    grid = [[False] * w for _ in range(h)]
    xs = range(max(0, math.ceil(x0 - 0.5)), min(w, math.ceil(x1 - 0.5)))
    ys = range(max(0, math.ceil(y0 - 0.5)), min(h, math.ceil(y1 - 0.5)))
    any_set = False
    for y in ys:
        for x in xs:
            grid[y][x] = True
            any_set = True
    if not any_set:
        cx = min(w - 1, max(0, int((x0 + x1) / 2 % w)))
        cy = min(h - 1, max(0, int((y0 + y1) / 2)))
        grid[cy][cx] = True
    return grid


def shift_mask(mask, dx, dy):
    h = len(mask)
    w = len(mask[0])
    out = [[False] * w for _ in range(h)]
    for y in range(h):
        ny = y + dy
        if ny < 0 or ny >= h:
            continue
        for x in range(w):
            if mask[y][x]:
                out[ny][(x + dx) % w] = True
    return out


def ema_wrap(old, new, alpha, width):
    ox, oy = old
    nx, ny = new
    dx = nx - ox
    dx -= round(dx / width) * width
    sx = (ox + alpha * dx) % width
    sy = oy + alpha * (ny - oy)
    return (sx, sy)


def plan_keyframes(start_ms, end_ms, fps, n):
    f0 = math.ceil(start_ms * fps / 1000.0)
    f1 = math.ceil(end_ms * fps / 1000.0) - 1
    if f1 < f0:
        raise ValueError("cue spans zero frames")
    ks = list(range(f0, f1 + 1, n))
    if ks[-1] != f1:
        ks.append(f1)
    return ks


class NaiveRun:
    """Replays a full run from script cues + a fixture mapping, naively.

    cues: list of dicts with keys id, start_ms, end_ms, prompt, effect,
          strength, feather_inner, feather_outer, attack_ms, release_ms,
          floor_luma (already normalized/defaulted).
    fixture: dict (frame_index, prompt) -> {"candidates": [(box, score)],
             "mask": nested bool grid or None}. A missing key is a miss.
    """

    def __init__(self, cues, fixture, fps, n, grace, alpha, width, height,
                 box_threshold=0.3):
        self.cues = cues
        self.fixture = fixture
        self.fps = fps
        self.n = n
        self.grace = grace
        self.alpha = alpha
        self.width = width
        self.height = height
        self.box_threshold = box_threshold

    def frame_time_ms(self, f):
        return f * 1000.0 / self.fps

    def run(self, frame_indices):
        """Returns {frame_index: None (copy) | composited layer list}.

        Layer list entries are (field, strength, floor_luma, e, effect) in
        script order, already filtered down to effective layers.
        """
        per_cue = []
        for cue in self.cues:
            ks = plan_keyframes(cue["start_ms"], cue["end_ms"], self.fps, self.n)
            ks = [k for k in ks if k in frame_indices or k <= max(frame_indices)]
            state = None
            snapshots = []
            for k in ks:
                state = self._step(state, k, cue)
                snapshots.append((k, state))
            per_cue.append((cue, ks, snapshots))

        plans = {}
        for cue, ks, snapshots in per_cue:
            f0 = ks[0]
            f1 = math.ceil(cue["end_ms"] * self.fps / 1000.0) - 1
            for i, (k, state) in enumerate(snapshots):
                hi = snapshots[i + 1][0] if i + 1 < len(snapshots) else f1 + 1
                if state["status"] == "lost" or state["mask"] is None:
                    continue
                dx = round(state["smoothed"][0] - state["anchor"][0])
                dy = round(state["smoothed"][1] - state["anchor"][1])
                shifted = shift_mask(state["mask"], dx, dy)
                if not any(any(row) for row in shifted):
                    continue
                dist = naive_chamfer_wrap(shifted)
                field = attenuation(dist, cue["feather_inner"], cue["feather_outer"])
                fmax = max(max(row) for row in field)
                for f in range(max(k, f0), hi):
                    if f not in frame_indices or f > f1:
                        continue
                    e = envelope(cue["start_ms"], cue["end_ms"],
                                 cue["attack_ms"], cue["release_ms"],
                                 self.frame_time_ms(f))
                    if cue["effect"] == "vignette":
                        wgt = cue["strength"] * e * (1.0 - cue["floor_luma"])
                    else:
                        wgt = cue["strength"] * e
                    if wgt == 0.0 or fmax == 0.0:
                        continue
                    plans.setdefault(f, []).append(
                        (field, cue["strength"], cue["floor_luma"], e, cue["effect"])
                    )
        return {f: plans.get(f) for f in frame_indices}

    def _step(self, state, k, cue):
        entry = self.fixture.get((k, cue["prompt"]))
        cands = entry["candidates"] if entry else []
        chosen = select_detection(cands, self.box_threshold)
        if chosen is None:
            held = (state["held"] if state else 0) + 1
            status = "held" if held <= self.grace else "lost"
            new = dict(state) if state else {
                "status": status, "mask": None, "anchor": None,
                "smoothed": None, "held": held,
            }
            new["status"] = status
            new["held"] = held
            return new
        box, _score = chosen
        mask = entry.get("mask")
        if mask is None or not any(any(row) for row in mask):
            mask = box_fill_mask(box, self.width, self.height)
        center = ((box[0] + box[2]) / 2.0, (box[1] + box[3]) / 2.0)
        if state is None or state["smoothed"] is None:
            smoothed = center
        else:
            smoothed = ema_wrap(state["smoothed"], center, self.alpha, self.width)
        return {
            "status": "active", "mask": mask, "anchor": center,
            "smoothed": smoothed, "held": 0,
        }
