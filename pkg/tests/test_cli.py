import pytest

from conftest import make_frame_files, serve_app
from scriptfocus import frames as frame_io
from scriptfocus.backends import DetectionParams, load_sidecar, write_sidecar
from scriptfocus.cli import main
from scriptfocus.service import create_app
from test_pipeline import (
    PROMPT,
    SCRIPT_TEXT,
    _scenario_frames,
    _scenario_records,
)

PARAMS = DetectionParams()


@pytest.fixture
def workdir(tmp_path, rng):
    frames_dir = tmp_path / "frames"
    make_frame_files(frames_dir, _scenario_frames(rng))
    fixture = tmp_path / "fixture.json"
    write_sidecar(_scenario_records(), fixture, PARAMS)
    script = tmp_path / "script.txt"
    script.write_text(SCRIPT_TEXT, encoding="utf-8")
    return tmp_path


class TestValidate:
    def test_valid_script(self, workdir, capsys):
        code = main(["validate", str(workdir / "script.txt")])
        out = capsys.readouterr().out
        assert code == 0
        assert PROMPT in out
        assert "cue-0" in out

    def test_invalid_script_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("00:00:12.000 --> 00:00:10.000\nprompt: x\n")
        code = main(["validate", str(bad)])
        err = capsys.readouterr().err
        assert code == 2
        assert "line 1" in err

    def test_missing_file_exit_66(self, tmp_path):
        assert main(["validate", str(tmp_path / "absent.txt")]) == 66


class TestDetect:
    def test_fixture_sidecar_matches_plan(self, workdir, capsys):
        out = workdir / "sc.json"
        code = main([
            "detect", "--script", str(workdir / "script.txt"),
            "--frames", str(workdir / "frames"), "--fps", "10",
            "--keyframe-interval", "2",
            "--backend", "fixture", "--fixture", str(workdir / "fixture.json"),
            "--out", str(out),
        ])
        assert code == 0
        _, records = load_sidecar(out)
        assert [r.frame_index for r in records] == [0, 2, 4, 5]

    def test_dry_run_prints_plan(self, workdir, capsys):
        code = main([
            "detect", "--script", str(workdir / "script.txt"),
            "--frames", str(workdir / "frames"), "--fps", "10",
            "--keyframe-interval", "2", "--dry-run",
            "--fixture", "does-not-matter.json",
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert "0 2 4 5" in out

    def test_unreachable_endpoint_exit_69_with_partial_sidecar(self, workdir):
        out = workdir / "partial.json"
        code = main([
            "detect", "--script", str(workdir / "script.txt"),
            "--frames", str(workdir / "frames"), "--fps", "10",
            "--keyframe-interval", "2",
            "--backend", "remote", "--endpoint", "http://127.0.0.1:9",
            "--out", str(out),
        ])
        assert code == 69
        _, records = load_sidecar(out)
        assert len(records) == 4
        assert all(r.detection is None for r in records)


class TestProcess:
    def _process(self, workdir, out_name, extra=()):
        return main([
            "process", "--script", str(workdir / "script.txt"),
            "--frames", str(workdir / "frames"), "--fps", "10",
            "--keyframe-interval", "2",
            "--backend", "fixture", "--fixture", str(workdir / "fixture.json"),
            "--out", str(workdir / out_name), *extra,
        ])

    def test_runs_and_reports(self, workdir, capsys):
        assert self._process(workdir, "out") == 0
        out = capsys.readouterr().out
        assert "rendered" in out
        for f in range(6):
            assert (workdir / "out" / frame_io.frame_name(f)).exists()

    def test_empty_script_copies(self, workdir, tmp_path):
        empty = workdir / "empty.txt"
        empty.write_text("# nothing\n")
        code = main([
            "process", "--script", str(empty),
            "--frames", str(workdir / "frames"), "--fps", "10",
            "--backend", "fixture", "--fixture", str(workdir / "fixture.json"),
            "--out", str(workdir / "out_empty"),
        ])
        assert code == 0
        for f in range(6):
            name = frame_io.frame_name(f)
            assert (workdir / "out_empty" / name).read_bytes() == \
                (workdir / "frames" / name).read_bytes()

    def test_reuse_sidecar_flag(self, workdir):
        assert self._process(workdir, "out_a") == 0
        code = main([
            "process", "--script", str(workdir / "script.txt"),
            "--frames", str(workdir / "frames"), "--fps", "10",
            "--keyframe-interval", "2",
            "--reuse-sidecar", str(workdir / "out_a" / "sidecar.json"),
            "--out", str(workdir / "out_b"),
        ])
        assert code == 0
        for f in range(6):
            name = frame_io.frame_name(f)
            assert (workdir / "out_a" / name).read_bytes() == \
                (workdir / "out_b" / name).read_bytes()

    def test_workers_flag_identical(self, workdir):
        assert self._process(workdir, "out_w1", ("--workers", "1")) == 0
        assert self._process(workdir, "out_w8", ("--workers", "8")) == 0
        for f in range(6):
            name = frame_io.frame_name(f)
            assert (workdir / "out_w1" / name).read_bytes() == \
                (workdir / "out_w8" / name).read_bytes()

    def test_remote_backend_equals_fixture(self, workdir):
        assert self._process(workdir, "out_fixture") == 0
        app = create_app(workdir / "fixture.json", workdir / "frames")
        with serve_app(app) as url:
            code = main([
                "process", "--script", str(workdir / "script.txt"),
                "--frames", str(workdir / "frames"), "--fps", "10",
                "--keyframe-interval", "2",
                "--backend", "remote", "--endpoint", url,
                "--out", str(workdir / "out_remote"),
            ])
        assert code == 0
        for f in range(6):
            name = frame_io.frame_name(f)
            assert (workdir / "out_remote" / name).read_bytes() == \
                (workdir / "out_fixture" / name).read_bytes()

    def test_missing_frames_exit_66(self, workdir):
        code = main([
            "process", "--script", str(workdir / "script.txt"),
            "--frames", str(workdir / "nope"), "--fps", "10",
            "--backend", "fixture", "--fixture", str(workdir / "fixture.json"),
            "--out", str(workdir / "o"),
        ])
        assert code == 66

    def test_usage_error_exit_64(self, workdir):
        code = main([
            "process", "--script", str(workdir / "script.txt"),
            "--frames", str(workdir / "frames"), "--fps", "10",
            "--out", str(workdir / "o"),
        ])  # no backend selected
        assert code == 64


class TestPreview:
    def test_panels_written(self, workdir):
        frame = workdir / "frames" / frame_io.frame_name(2)
        code = main([
            "preview", str(frame), "--prompt", PROMPT,
            "--fixture", str(workdir / "fixture.json"),
            "--out", str(workdir / "panels"),
        ])
        assert code == 0
        a = workdir / "panels" / "frame_000002.a.png"
        b = workdir / "panels" / "frame_000002.b.png"
        c = workdir / "panels" / "frame_000002.c.png"
        assert a.exists() and b.exists() and c.exists()
        assert a.read_bytes() == frame.read_bytes()
        # the overlay panel differs from the original
        assert b.read_bytes() != a.read_bytes()

    def test_prompt_normalized_like_script(self, workdir):
        frame = workdir / "frames" / frame_io.frame_name(0)
        code = main([
            "preview", str(frame), "--prompt", f"Look at the {PROMPT}",
            "--fixture", str(workdir / "fixture.json"),
            "--out", str(workdir / "panels2"),
        ])
        assert code == 0

    def test_no_detection_exit_65_writes_only_a(self, workdir):
        frame = workdir / "frames" / frame_io.frame_name(4)  # recorded miss
        code = main([
            "preview", str(frame), "--prompt", PROMPT,
            "--fixture", str(workdir / "fixture.json"),
            "--out", str(workdir / "panels3"),
        ])
        assert code == 65
        assert (workdir / "panels3" / "frame_000004.a.png").exists()
        assert not (workdir / "panels3" / "frame_000004.b.png").exists()
        assert not (workdir / "panels3" / "frame_000004.c.png").exists()


class TestConfigFile:
    def test_config_supplies_defaults_flags_win(self, workdir, capsys):
        cfg = workdir / "run.cfg"
        cfg.write_text(
            "fps = 10\nkeyframe_interval = 2\nbackend = fixture\n"
            f"fixture = {workdir / 'fixture.json'}\n"
        )
        code = main([
            "--config", str(cfg),
            "process", "--script", str(workdir / "script.txt"),
            "--frames", str(workdir / "frames"),
            "--out", str(workdir / "out_cfg"),
        ])
        assert code == 0
        # flag overrides config: bogus fixture via flag loses to nothing else
        code = main([
            "--config", str(cfg),
            "detect", "--script", str(workdir / "script.txt"),
            "--frames", str(workdir / "frames"),
            "--keyframe-interval", "2", "--dry-run",
            "--fps", "10",
        ])
        assert code == 0

    def test_unknown_config_key(self, workdir):
        cfg = workdir / "bad.cfg"
        cfg.write_text("wobble = 1\n")
        code = main(["--config", str(cfg), "validate", str(workdir / "script.txt")])
        assert code == 65


class TestHelp:
    def test_help_documents_flags(self, capsys):
        assert main(["process", "--help"]) == 0
        out = capsys.readouterr().out
        for flag in ("--script", "--frames", "--out", "--fps", "--keyframe-interval",
                     "--backend", "--endpoint", "--fixture", "--reuse-sidecar",
                     "--workers", "--effect"):
            assert flag in out
        assert main(["detect", "--help"]) == 0
        out = capsys.readouterr().out
        assert "--dry-run" in out
