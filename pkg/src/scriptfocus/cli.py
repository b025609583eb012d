"""Command-line surface.

Subcommands: validate, detect, process, preview, serve. Option values
resolve as flags > config file (key = value lines, see --config) >
built-in defaults. Exit codes follow the sysexits convention where it
matters for scripting: 0 ok, 2 script diagnostics (validate), 64 usage,
65 bad data, 66 missing input, 69 backend unavailable.

Video containers are handled outside this tool; see the README for the
ffmpeg frame-sequence recipes.
"""

from __future__ import annotations

import logging
import shutil
import sys
from pathlib import Path

import click
import numpy as np

from . import frames as frame_io
from .backends import (
    BackendConfig,
    BackendError,
    BackendUnavailable,
    DetectionParams,
    EmptySegmentation,
    Frame,
    MalformedFixture,
    detect_full,
    make_backend,
    segment,
)
from .effects import CueLayer, attenuation_field, combine_cues
from .geometry import FrameDims
from .masks import MalformedRLE, mask_from_box, rle_decode, rle_encode
from .pipeline import (
    DimsInconsistent,
    EmptySpan,
    InputMissing,
    RunConfig,
    plan_keyframes,
    process_video,
    run_detection,
)
from .script import (
    MalformedCue,
    MalformedTimecode,
    format_timecode,
    normalize_prompt,
    parse_script,
)

log = logging.getLogger(__name__)

_CONFIG_KEYS = {
    "fps": float,
    "keyframe_interval": int,
    "grace_keyframes": int,
    "ema_alpha": float,
    "workers": int,
    "backend": str,
    "endpoint": str,
    "fixture": str,
    "effect": str,
    "box_threshold": float,
    "text_threshold": float,
}


class CommandError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _load_config_file(path: str | None) -> dict:
    """Flat key = value config; '#' comments; quotes optional."""
    candidates = [Path(path)] if path else [Path("scriptfocus.toml")]
    for candidate in candidates:
        if not candidate.is_file():
            if path:
                raise CommandError(f"config file not found: {path}", 66)
            continue
        values = {}
        for line_no, raw in enumerate(candidate.read_text(encoding="utf-8").splitlines(), 1):
            body = raw.split("#", 1)[0].strip()
            if not body:
                continue
            key, sep, value = body.partition("=")
            key = key.strip().lower()
            if not sep or key not in _CONFIG_KEYS:
                raise CommandError(f"{candidate}:{line_no}: unknown config key {key!r}", 65)
            value = value.strip().strip("\"'")
            try:
                values[key] = _CONFIG_KEYS[key](value)
            except ValueError:
                raise CommandError(f"{candidate}:{line_no}: bad value for {key}", 65)
        return values
    return {}


def _resolve(flag_value, cfg: dict, key: str, default=None):
    if flag_value is not None:
        return flag_value
    return cfg.get(key, default)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Config file with key = value lines (default ./scriptfocus.toml if present).")
@click.option("-v", "--verbose", count=True, help="-v for info, -vv for debug logs.")
@click.pass_context
def cli(ctx, config_path, verbose):
    """Scripted attention-guidance vignettes for 360-degree video frames."""
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = _load_config_file(config_path)


def _read_script(path: str):
    p = Path(path)
    if not p.is_file():
        raise CommandError(f"script file not found: {path}", 66)
    return parse_script(p.read_text(encoding="utf-8"), source_path=str(p))


def _backend_config(cfg, backend, endpoint, fixture) -> BackendConfig:
    kind = _resolve(backend, cfg, "backend")
    endpoint = _resolve(endpoint, cfg, "endpoint")
    fixture = _resolve(fixture, cfg, "fixture")
    if kind is None:
        kind = "fixture" if fixture else ("remote" if endpoint else None)
    if kind is None:
        raise click.UsageError("pick a backend: --fixture PATH or --endpoint URL")
    try:
        if kind == "fixture":
            if not fixture:
                raise click.UsageError("--backend fixture needs --fixture PATH")
            return BackendConfig(kind="fixture", fixture_path=str(fixture))
        if not endpoint:
            raise click.UsageError("--backend remote needs --endpoint URL")
        return BackendConfig(kind="remote", endpoint_url=str(endpoint))
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _params(cfg, box_threshold, text_threshold) -> DetectionParams:
    try:
        return DetectionParams(
            box_threshold=_resolve(box_threshold, cfg, "box_threshold", 0.3),
            text_threshold=_resolve(text_threshold, cfg, "text_threshold", 0.25),
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))


_shared = [
    click.option("--script", "script_path", required=True, type=click.Path(),
                 help="Attention script file."),
    click.option("--frames", "frames_dir", required=True, type=click.Path(),
                 help="Directory of frame_NNNNNN.png inputs."),
    click.option("--fps", type=float, default=None, help="Frame rate of the sequence."),
    click.option("--keyframe-interval", type=int, default=None,
                 help="Query the backend every N frames (default 15)."),
    click.option("--backend", type=click.Choice(["remote", "fixture"]), default=None),
    click.option("--endpoint", default=None, help="Inference service base URL."),
    click.option("--fixture", default=None, type=click.Path(),
                 help="Recorded sidecar/fixture file to replay."),
    click.option("--box-threshold", type=float, default=None),
    click.option("--text-threshold", type=float, default=None),
]


def _with(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


@cli.command()
@click.argument("script_path", type=click.Path())
def validate(script_path):
    """Parse a script and print its cue table (exit 2 on diagnostics)."""
    try:
        script = _read_script(script_path)
    except (MalformedCue, MalformedTimecode) as exc:
        raise CommandError(f"invalid script: {exc}", 2)
    click.echo(f"{len(script.cues)} cue(s) in {script.source_path}")
    header = f"{'id':<10} {'start':>12} {'end':>12} {'effect':<10} {'strength':>8}  prompt"
    click.echo(header)
    for cue in script.cues:
        click.echo(
            f"{cue.id:<10} {format_timecode(cue.start):>12} {format_timecode(cue.end):>12} "
            f"{cue.effect:<10} {cue.strength:>8}  {cue.prompt}"
        )


@cli.command()
@_with(_shared)
@click.option("--out", "out_path", type=click.Path(), default="sidecar.json",
              help="Sidecar file to write (detect writes a file, not a directory).")
@click.option("--grace-keyframes", type=int, default=None)
@click.option("--ema-alpha", type=float, default=None)
@click.option("--dry-run", is_flag=True, help="Print planned keyframes; no backend calls.")
@click.pass_obj
def detect(cfg, script_path, frames_dir, fps, keyframe_interval, backend, endpoint,
           fixture, box_threshold, text_threshold, out_path, grace_keyframes,
           ema_alpha, dry_run):
    """Run only the keyframe detect/segment phase and write the sidecar."""
    script = _read_script(script_path)
    fps = _resolve(fps, cfg, "fps")
    if fps is None:
        raise click.UsageError("--fps is required")
    n = _resolve(keyframe_interval, cfg, "keyframe_interval", 15)
    if dry_run:
        for cue in script.cues:
            try:
                ks = plan_keyframes(cue, fps, n)
            except EmptySpan:
                click.echo(f"{cue.id}: spans no frames")
                continue
            click.echo(f"{cue.id}: {len(ks)} keyframes: {' '.join(map(str, ks))}")
        return
    config = RunConfig(
        frames_dir=str(frames_dir), out_dir=".", fps=fps, keyframe_interval=n,
        grace_keyframes=_resolve(grace_keyframes, cfg, "grace_keyframes", 2),
        ema_alpha=_resolve(ema_alpha, cfg, "ema_alpha", 0.5),
        params=_params(cfg, box_threshold, text_threshold),
        backend=_backend_config(cfg, backend, endpoint, fixture),
    )
    summary = run_detection(config, script, out_path)
    click.echo(f"wrote {out_path}: keyframes active={summary.keyframes_active} "
               f"held={summary.keyframes_held} lost={summary.keyframes_lost} "
               f"(backend calls: {summary.backend_calls})")


@cli.command()
@_with(_shared)
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Output directory for rendered frames + sidecar.")
@click.option("--reuse-sidecar", type=click.Path(), default=None,
              help="Replay this sidecar; no backend calls at all.")
@click.option("--workers", type=int, default=None,
              help="Compositing threads (default: CPU count). Output identical for any N.")
@click.option("--effect", type=click.Choice(["vignette", "desaturate"]), default=None,
              help="Override every cue's effect.")
@click.option("--grace-keyframes", type=int, default=None)
@click.option("--ema-alpha", type=float, default=None)
@click.pass_obj
def process(cfg, script_path, frames_dir, fps, keyframe_interval, backend, endpoint,
            fixture, box_threshold, text_threshold, out_dir, reuse_sidecar, workers,
            effect, grace_keyframes, ema_alpha):
    """Full pipeline run: track scripted targets and render the cues."""
    script = _read_script(script_path)
    fps = _resolve(fps, cfg, "fps")
    if fps is None:
        raise click.UsageError("--fps is required")
    backend_cfg = None
    if reuse_sidecar is None:
        backend_cfg = _backend_config(cfg, backend, endpoint, fixture)
    else:
        # keyframes replay from the sidecar; a fixture handle is never called
        backend_cfg = BackendConfig(kind="fixture", fixture_path=str(reuse_sidecar))
    config = RunConfig(
        frames_dir=str(frames_dir), out_dir=str(out_dir), fps=fps,
        keyframe_interval=_resolve(keyframe_interval, cfg, "keyframe_interval", 15),
        grace_keyframes=_resolve(grace_keyframes, cfg, "grace_keyframes", 2),
        ema_alpha=_resolve(ema_alpha, cfg, "ema_alpha", 0.5),
        params=_params(cfg, box_threshold, text_threshold),
        backend=backend_cfg,
        workers=_resolve(workers, cfg, "workers"),
        effect_override=_resolve(effect, cfg, "effect"),
        reuse_sidecar=reuse_sidecar,
    )
    summary = process_video(config, script)
    click.echo(
        f"{summary.frames_total} frames: {summary.frames_rendered} rendered, "
        f"{summary.frames_copied} copied, {summary.frames_existing} kept; "
        f"keyframes active={summary.keyframes_active} held={summary.keyframes_held} "
        f"lost={summary.keyframes_lost}; {summary.elapsed_s:.2f}s"
    )


@cli.command()
@click.argument("frame_path", type=click.Path())
@click.option("--prompt", default=None, help="Object description to locate.")
@click.option("--fixture", default=None, type=click.Path(),
              help="Sidecar/fixture file to replay.")
@click.option("--backend", type=click.Choice(["remote", "fixture"]), default=None)
@click.option("--endpoint", default=None)
@click.option("--frame-index", type=int, default=None,
              help="Frame index (default: parsed from the file name).")
@click.option("--effect", type=click.Choice(["vignette", "desaturate"]), default="vignette")
@click.option("--strength", type=float, default=0.8)
@click.option("--feather", nargs=2, type=float, default=(12.0, 48.0),
              help="Inner and outer feather distances in pixels.")
@click.option("--floor", "floor_luma", type=float, default=0.15)
@click.option("--box-threshold", type=float, default=None)
@click.option("--text-threshold", type=float, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Directory for the panels (default: beside the frame).")
@click.pass_obj
def preview(cfg, frame_path, prompt, fixture, backend, endpoint, frame_index,
            effect, strength, feather, floor_luma, box_threshold, text_threshold,
            out_dir):
    """Render the three inspection panels for one frame.

    Writes <stem>.a.png (original), <stem>.b.png (detection box + mask
    tint), <stem>.c.png (effect applied at full intensity).
    """
    src = Path(frame_path)
    if not src.is_file():
        raise CommandError(f"frame not found: {frame_path}", 66)
    if prompt is None:
        raise click.UsageError("--prompt is required")
    prompt = normalize_prompt(prompt)
    if frame_index is None:
        m = frame_io.FRAME_RE.match(src.name)
        if not m:
            raise click.UsageError("cannot infer --frame-index from the file name")
        frame_index = int(m.group(1))

    out_base = Path(out_dir) if out_dir else src.parent
    out_base.mkdir(parents=True, exist_ok=True)
    stem = src.name[:-4] if src.name.endswith(".png") else src.name
    panel = {p: out_base / f"{stem}.{p}.png" for p in ("a", "b", "c")}
    shutil.copyfile(src, panel["a"])

    pixels = frame_io.read_frame(src)
    frame = Frame(index=frame_index, pixels=pixels)
    backend_cfg = _backend_config(cfg, backend, endpoint, fixture)
    handle = make_backend(backend_cfg)
    try:
        params = _params(cfg, box_threshold, text_threshold)
        chosen, _ = detect_full(frame, prompt, params, handle)
        if chosen is None:
            raise CommandError(
                f"no detection for {prompt!r} on frame {frame_index}; wrote only {panel['a']}", 65)
        try:
            mask_rle = segment(frame, chosen.box, handle)
        except EmptySegmentation:
            mask_rle = rle_encode(mask_from_box(
                chosen.box.as_tuple(), FrameDims(frame.width, frame.height)))
    finally:
        handle.close()

    mask = rle_decode(mask_rle)
    frame_io.write_frame(panel["b"], _panel_overlay(pixels, chosen.box, mask))
    inner, outer = feather
    field = attenuation_field(mask, inner, outer)
    layer = CueLayer(field=field, strength=strength, floor_luma=floor_luma,
                     e=1.0, effect=effect)
    frame_io.write_frame(panel["c"], combine_cues(pixels, [layer]))
    for name in ("a", "b", "c"):
        click.echo(str(panel[name]))


_BOX_COLOR = np.array([230.0, 40.0, 40.0])
_TINT_COLOR = np.array([40.0, 140.0, 255.0])
_OUTLINE_PX = 3
_TINT_WEIGHT = 0.4


def _panel_overlay(pixels: np.ndarray, box, mask: np.ndarray) -> np.ndarray:
    out = pixels.astype(np.float64)
    tinted = np.rint(out * (1.0 - _TINT_WEIGHT) + _TINT_COLOR * _TINT_WEIGHT)
    out = np.where(mask[..., None], tinted, out)
    h, w = mask.shape
    x0 = max(0, int(round(box.x0)))
    y0 = max(0, int(round(box.y0)))
    x1 = min(w, int(round(box.x1)))
    y1 = min(h, int(round(box.y1)))
    t = _OUTLINE_PX
    out[y0:min(y0 + t, y1), x0:x1] = _BOX_COLOR
    out[max(y1 - t, y0):y1, x0:x1] = _BOX_COLOR
    out[y0:y1, x0:min(x0 + t, x1)] = _BOX_COLOR
    out[y0:y1, max(x1 - t, x0):x1] = _BOX_COLOR
    return out.astype(np.uint8)


@cli.command()
@click.option("--fixture", required=True, type=click.Path(),
              help="Sidecar/fixture file to serve.")
@click.option("--frames", "frames_dir", required=True, type=click.Path(),
              help="Frame directory the fixture was recorded against.")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8787)
def serve(fixture, frames_dir, host, port):
    """Serve the recorded results over the detect/segment wire protocol."""
    from .service import serve as run_service

    run_service(fixture, frames_dir, host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 64
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        return 130
    except CommandError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except (MalformedCue, MalformedTimecode, MalformedFixture, MalformedRLE,
            DimsInconsistent, BackendError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 65
    except (InputMissing, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 66
    except BackendUnavailable as exc:
        click.echo(f"error: {exc}", err=True)
        return 69
    return 0


if __name__ == "__main__":
    sys.exit(main())
