"""Frame-exact rendering: drive a session's virtual clock in fixed fps steps,
capture deterministic frames, and assemble them into a video."""

from __future__ import annotations

import shutil
import subprocess
import tempfile
from pathlib import Path

from .cdp_backend import CdpSession
from .frames import FRAME_FILE_PATTERN, FrameSequence, RenderError, RenderSettings
from .node_backend import NodeSession


class EncoderError(RenderError):
    pass


def open_session(settings: RenderSettings):
    """A browser-protocol session when a binary is configured, else the Node host."""
    if settings.browser_binary:
        return CdpSession(settings.browser_binary, settings.load_timeout_ms)
    return NodeSession(settings.load_timeout_ms)


def render(doc: str, duration_s: float, settings: RenderSettings,
           session=None) -> FrameSequence:
    """Capture round(duration_s * fps) frames at virtual times k * 1000/fps.

    Frame 0 is the initial state; the virtual clock is never advanced past
    duration_s * 1000 ms. Rendering the same document twice yields identical
    per-frame digests.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    n_frames = round(duration_s * settings.fps)
    own_session = session is None
    if own_session:
        session = open_session(settings)
    try:
        session.load(doc, offline=settings.offline)
        frames: list[bytes] = []
        clock_ms = 0  # integer virtual-clock position
        for k in range(n_frames):
            target = round(k * 1000.0 / settings.fps)
            if target > clock_ms:
                session.advance(target - clock_ms)
                clock_ms = target
            try:
                frames.append(session.screenshot())
            except RenderError as exc:
                raise RenderError(f"screenshot failed at frame {k}: {exc}") from exc
        return FrameSequence.from_frames(frames, settings.fps, duration_s)
    finally:
        if own_session:
            session.close()


def probe_dom(session, query: str, attribute: str) -> str:
    """Read-only DOM attribute query at the session's current virtual time."""
    return session.probe(query, attribute)


def assemble(frames: FrameSequence, out: str | Path, settings: RenderSettings) -> Path:
    """Write the zero-padded frame sequence and encode it with ffmpeg."""
    if not frames.frames:
        raise ValueError("cannot assemble an empty frame sequence")
    encoder = settings.encoder_path or shutil.which("ffmpeg")
    if encoder is None or not (Path(encoder).is_file() or shutil.which(encoder)):
        searched = settings.encoder_path or "ffmpeg on PATH"
        raise EncoderError(f"encoder not found: searched {searched}")

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(prefix="reelforge-frames-") as tmp:
        frame_dir = Path(tmp) / "frames"
        frames.write_frames(frame_dir)
        cmd = [
            str(encoder),
            "-y",
            "-framerate", str(frames.fps),
            "-i", str(frame_dir / FRAME_FILE_PATTERN),
            "-pix_fmt", "yuv420p",
            "-r", str(frames.fps),
            str(out),
        ]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise EncoderError(
                f"encoder exited with {proc.returncode}: {proc.stderr.strip()[:500]}"
            )
    if not out.is_file():
        raise EncoderError(f"encoder reported success but {out} does not exist")
    return out
