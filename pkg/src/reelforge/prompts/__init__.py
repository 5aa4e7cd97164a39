"""Versioned prompt templates with named placeholder slots.

Templates live as plain text files in this package. Only the declared slot
names are substituted, so literal braces elsewhere in a template (JSON
examples, JS snippets) pass through untouched.
"""

from __future__ import annotations

from pathlib import Path

_TEMPLATE_DIR = Path(__file__).resolve().parent

SLOTS = (
    "intent",
    "data",
    "duration",
    "plan",
    "feedback",
    "chart_count",
    "image_count",
    "sample_id",
    "transcript",
    "html",
)


class TemplateError(KeyError):
    pass


def load_template(name: str) -> str:
    path = _TEMPLATE_DIR / f"{name}.txt"
    if not path.is_file():
        raise TemplateError(f"no prompt template named {name!r}")
    return path.read_text(encoding="utf-8")


def render_template(name: str, **values) -> str:
    text = load_template(name)
    for slot, value in values.items():
        if slot not in SLOTS:
            raise TemplateError(f"unknown slot {slot!r} for template {name!r}")
        text = text.replace("{" + slot + "}", str(value))
    return text
