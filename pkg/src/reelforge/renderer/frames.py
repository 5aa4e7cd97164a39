"""Render settings and immutable frame sequences."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

FRAME_WIDTH = 1280
FRAME_HEIGHT = 720
DEFAULT_FPS = 10

FRAME_FILE_PATTERN = "%05d.png"


class RenderError(RuntimeError):
    """Browser/session failure during load, clock advance, or capture."""


@dataclass(frozen=True)
class RenderSettings:
    fps: int = DEFAULT_FPS
    load_timeout_ms: int = 15_000
    offline: bool = True
    browser_binary: str | None = None
    encoder_path: str | None = None

    # frame geometry is fixed by the output contract
    width: int = field(default=FRAME_WIDTH, init=False)
    height: int = field(default=FRAME_HEIGHT, init=False)

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError("fps must be a positive integer")
        if self.load_timeout_ms <= 0:
            raise ValueError("load_timeout_ms must be positive")


def frame_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class FrameSequence:
    frames: tuple[bytes, ...]
    timestamps_ms: tuple[float, ...]
    digests: tuple[str, ...]
    fps: int
    duration_s: float

    def __post_init__(self):
        expected = round(self.duration_s * self.fps)
        if len(self.frames) != expected:
            raise ValueError(f"expected {expected} frames for {self.duration_s}s @ {self.fps}fps, got {len(self.frames)}")
        for k, t in enumerate(self.timestamps_ms):
            if t != k * 1000.0 / self.fps:
                raise ValueError(f"timestamp[{k}] = {t}, expected {k * 1000.0 / self.fps}")
        if len(self.digests) != len(self.frames):
            raise ValueError("one digest per frame required")
        for k, (buf, dig) in enumerate(zip(self.frames, self.digests)):
            if frame_digest(buf) != dig:
                raise ValueError(f"digest mismatch at frame {k}")

    @classmethod
    def from_frames(cls, frames: list[bytes], fps: int, duration_s: float) -> "FrameSequence":
        return cls(
            frames=tuple(frames),
            timestamps_ms=tuple(k * 1000.0 / fps for k in range(len(frames))),
            digests=tuple(frame_digest(b) for b in frames),
            fps=fps,
            duration_s=duration_s,
        )

    def frame_bytes(self) -> list[bytes]:
        return list(self.frames)

    def write_frames(self, directory: str | Path) -> list[Path]:
        """Write the zero-indexed, zero-padded PNG sequence."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for k, buf in enumerate(self.frames):
            p = directory / (FRAME_FILE_PATTERN % k)
            p.write_bytes(buf)
            paths.append(p)
        return paths
