"""Deterministic rendering of validated animation documents."""

from .frames import FrameSequence, RenderError, RenderSettings, frame_digest
from .render import EncoderError, assemble, open_session, probe_dom, render

__all__ = [
    "FrameSequence",
    "RenderError",
    "RenderSettings",
    "EncoderError",
    "frame_digest",
    "assemble",
    "open_session",
    "probe_dom",
    "render",
]
