"""Deterministic rendering: frame sequences, the Node-hosted session, the
frame-count law, DOM probing, network isolation, and video assembly."""

import json
import os
import stat
from pathlib import Path

import pytest
from hypothesis import given, settings as hsettings, strategies as st

from reelforge.renderer import (
    EncoderError,
    FrameSequence,
    RenderError,
    RenderSettings,
    assemble,
    frame_digest,
    open_session,
    probe_dom,
    render,
)
from reelforge.renderer.cdp_backend import CdpSession, _offline_rewrite
from reelforge.renderer.node_backend import NodeSession


class TestFrameSequence:
    def test_from_frames_builds_invariants(self):
        seq = FrameSequence.from_frames([b"a", b"b", b"c"], fps=1, duration_s=3.0)
        assert seq.timestamps_ms == (0.0, 1000.0, 2000.0)
        assert seq.digests == tuple(frame_digest(b) for b in (b"a", b"b", b"c"))

    def test_wrong_frame_count_rejected(self):
        with pytest.raises(ValueError, match="expected 3 frames"):
            FrameSequence.from_frames([b"a", b"b"], fps=1, duration_s=3.0)

    def test_bad_timestamp_rejected(self):
        with pytest.raises(ValueError, match="timestamp"):
            FrameSequence(
                frames=(b"a",),
                timestamps_ms=(1.0,),
                digests=(frame_digest(b"a"),),
                fps=1,
                duration_s=1.0,
            )

    def test_digest_mismatch_rejected(self):
        with pytest.raises(ValueError, match="digest mismatch"):
            FrameSequence(
                frames=(b"a",),
                timestamps_ms=(0.0,),
                digests=(frame_digest(b"other"),),
                fps=1,
                duration_s=1.0,
            )

    @given(
        fps=st.integers(min_value=1, max_value=60),
        duration_s=st.floats(min_value=0.1, max_value=30.0, allow_nan=False),
    )
    @hsettings(max_examples=50)
    def test_frame_count_law_property(self, fps, duration_s):
        n = round(duration_s * fps)
        seq = FrameSequence.from_frames([b"x"] * n, fps=fps, duration_s=duration_s)
        assert len(seq.frames) == n
        for k, t in enumerate(seq.timestamps_ms):
            assert t == k * 1000.0 / fps

    def test_write_frames_zero_padded(self, tmp_path):
        seq = FrameSequence.from_frames([b"a", b"b"], fps=1, duration_s=2.0)
        paths = seq.write_frames(tmp_path / "frames")
        assert [p.name for p in paths] == ["00000.png", "00001.png"]
        assert (tmp_path / "frames" / "00001.png").read_bytes() == b"b"


class TestRenderSettings:
    def test_fixed_geometry(self):
        s = RenderSettings()
        assert (s.width, s.height) == (1280, 720)

    @pytest.mark.parametrize("kwargs", [{"fps": 0}, {"fps": -5}, {"load_timeout_ms": 0}])
    def test_bad_settings_rejected(self, kwargs):
        with pytest.raises(ValueError):
            RenderSettings(**kwargs)


class TestSessionSelection:
    def test_no_browser_binary_uses_node_host(self):
        session = open_session(RenderSettings())
        try:
            assert isinstance(session, NodeSession)
        finally:
            session.close()

    def test_missing_browser_binary_errors(self):
        with pytest.raises(RenderError, match="browser binary not found"):
            open_session(RenderSettings(browser_binary="/nonexistent/chrome"))

    def test_offline_rewrite_points_cdn_at_loopback(self):
        doc = '<script src="https://d3js.org/d3.v7.min.js"></script>'
        out = _offline_rewrite(doc, "http://127.0.0.1:8123/")
        assert out == '<script src="http://127.0.0.1:8123/vendor/d3.v7.min.js"></script>'

    def test_offline_rewrite_leaves_other_markup_alone(self, bar_doc):
        assert _offline_rewrite(bar_doc, "http://127.0.0.1:1/") == bar_doc


class TestRender:
    def test_determinism_bar(self, bar_doc):
        a = render(bar_doc, 3.0, RenderSettings(fps=10))
        b = render(bar_doc, 3.0, RenderSettings(fps=10))
        assert a.digests == b.digests

    def test_frames_actually_change_over_time(self, bar_doc):
        seq = render(bar_doc, 3.0, RenderSettings(fps=10))
        # 20 growth steps plus the initial state; tail frames are static
        assert len(set(seq.digests)) == 21
        assert seq.digests[20] == seq.digests[29]

    def test_nonpositive_duration_rejected(self, bar_doc):
        with pytest.raises(ValueError):
            render(bar_doc, 0.0, RenderSettings())

    def test_screenshot_error_names_frame(self):
        doc = "<!DOCTYPE html><html><head></head><body><p>no chart</p></body></html>"
        with pytest.raises(RenderError, match="frame 0"):
            render(doc, 1.0, RenderSettings(fps=1))

    def test_probe_and_clock_follow_timer_schedule(self, bar_doc):
        with NodeSession() as session:
            session.load(bar_doc)
            assert probe_dom(session, "#bar", "height") == "0"
            session.advance(950)
            assert probe_dom(session, "#bar", "height") == "45"
            session.advance(50)
            assert probe_dom(session, "#bar", "height") == "50"

    def test_probe_errors(self, bar_doc):
        with NodeSession() as session:
            session.load(bar_doc)
            with pytest.raises(RenderError, match="no match"):
                session.probe("#missing", "height")
            with pytest.raises(RenderError, match="absent"):
                session.probe("#bar", "data-nope")

    def test_harness_report_exposed(self, bar_doc):
        with NodeSession() as session:
            session.load(bar_doc)
            session.advance(3000)
            rep = session.report()["report"]
            assert rep["nowMs"] == 3000
            assert rep["pending"] == 0
            assert rep["violations"] == []

    def test_cdn_request_served_from_vendored_copy(self, docs_dir):
        doc = (docs_dir / "conforming_line.html").read_text(encoding="utf-8")
        with NodeSession() as session:
            session.load(doc)
            rep = session.report()
            assert rep["network"] == ["https://d3js.org/d3.v7.min.js"]
            assert rep["blocked"] == []

    def test_network_isolation_blocks_other_origins(self, bar_doc):
        doc = bar_doc.replace(
            "</body>", '<script src="https://tracking.example.org/x.js"></script>\n</body>'
        )
        with NodeSession() as session:
            session.load(doc)
            rep = session.report()
            assert rep["blocked"] == ["https://tracking.example.org/x.js"]
            assert "https://tracking.example.org/x.js" in rep["network"]

    def test_document_script_error_fails_load(self):
        doc = (
            "<!DOCTYPE html><html><head></head><body>"
            '<svg id="chart" width="1280" height="720"></svg>'
            "<script>throw new Error('boom at load');</script>"
            "</body></html>"
        )
        with NodeSession() as session:
            with pytest.raises(RenderError, match="boom at load"):
                session.load(doc)

    def test_frames_are_png(self, bar_doc):
        seq = render(bar_doc, 1.0, RenderSettings(fps=2))
        for buf in seq.frames:
            assert buf.startswith(b"\x89PNG")


FPS_DURATION_CASES = [(fps, d) for fps in (5, 10, 30) for d in (3, 10.5, 17)]


@pytest.fixture(scope="module")
def rendered(bar_doc):
    cache = {}
    for fps, d in FPS_DURATION_CASES:
        cache[(fps, d)] = render(bar_doc, d, RenderSettings(fps=fps))
    return cache


@pytest.mark.slow
class TestFrameCountLaw:
    @pytest.mark.parametrize("fps,duration", FPS_DURATION_CASES)
    def test_count_is_round_of_product(self, rendered, fps, duration):
        seq = rendered[(fps, duration)]
        assert len(seq.frames) == round(duration * fps)

    @pytest.mark.parametrize("fps,duration", FPS_DURATION_CASES)
    def test_timestamps_nominal(self, rendered, fps, duration):
        seq = rendered[(fps, duration)]
        assert seq.timestamps_ms[0] == 0.0
        for k, t in enumerate(seq.timestamps_ms):
            assert t == k * 1000.0 / fps


def make_stub_encoder(tmp_path) -> Path:
    """Fake video encoder: records its argv and the visible frame files, then
    writes a placeholder output."""
    stub = tmp_path / "stub-encoder"
    record = tmp_path / "invocation.json"
    stub.write_text(
        "#!/usr/bin/env python3\n"
        "import glob, json, os, sys\n"
        f"record = {str(record)!r}\n"
        "pattern = sys.argv[sys.argv.index('-i') + 1]\n"
        "frames = sorted(glob.glob(pattern.replace('%05d', '*')))\n"
        "json.dump({'argv': sys.argv[1:], 'frames': [os.path.basename(f) for f in frames]},\n"
        "          open(record, 'w'))\n"
        "open(sys.argv[-1], 'wb').write(b'MP4STUB')\n",
        encoding="utf-8",
    )
    stub.chmod(stub.stat().st_mode | stat.S_IXUSR)
    return stub


class TestAssemble:
    def seq(self):
        return FrameSequence.from_frames([b"f0", b"f1", b"f2", b"f3"], fps=2, duration_s=2.0)

    def test_exact_encoder_argv(self, tmp_path):
        stub = make_stub_encoder(tmp_path)
        out = assemble(self.seq(), tmp_path / "reel.mp4", RenderSettings(fps=2, encoder_path=str(stub)))
        assert out.read_bytes() == b"MP4STUB"
        rec = json.loads((tmp_path / "invocation.json").read_text())
        argv = rec["argv"]
        assert argv[0] == "-y"
        assert argv[1:3] == ["-framerate", "2"]
        assert argv[3] == "-i"
        assert argv[4].endswith("frames/%05d.png")
        assert argv[5:9] == ["-pix_fmt", "yuv420p", "-r", "2"]
        assert argv[9] == str(tmp_path / "reel.mp4")
        assert rec["frames"] == ["00000.png", "00001.png", "00002.png", "00003.png"]

    def test_missing_encoder_raises(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PATH", str(tmp_path))  # no ffmpeg reachable
        with pytest.raises(EncoderError, match="encoder not found"):
            assemble(self.seq(), tmp_path / "o.mp4", RenderSettings(fps=2))

    def test_encoder_failure_surfaces_stderr(self, tmp_path):
        bad = tmp_path / "bad-encoder"
        bad.write_text("#!/bin/sh\necho 'codec exploded' >&2\nexit 3\n", encoding="utf-8")
        bad.chmod(bad.stat().st_mode | stat.S_IXUSR)
        with pytest.raises(EncoderError, match="codec exploded"):
            assemble(self.seq(), tmp_path / "o.mp4", RenderSettings(fps=2, encoder_path=str(bad)))

    def test_empty_sequence_rejected(self, tmp_path):
        seq = FrameSequence(frames=(), timestamps_ms=(), digests=(), fps=1, duration_s=0.4)
        with pytest.raises(ValueError):
            assemble(seq, tmp_path / "o.mp4", RenderSettings())
