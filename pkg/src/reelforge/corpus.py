"""Benchmark corpus: manifest loading, chart-table extraction, summary statistics."""

from __future__ import annotations

import base64
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .endpoints import ChatClient, EndpointConfig, EndpointError

ANIMATION_CATEGORIES = frozenset(
    {"Emphasis", "Suspense", "Comparison", "Ellipsis", "Cohering", "Focalization"}
)
CHART_KINDS = ("bar", "line", "pie", "area", "multiple", "other")
COLUMN_ROLES = ("categorical", "temporal", "quantitative")

DURATION_BIN_S = 5.0

_HEX_COLOR = re.compile(r"^#[0-9a-fA-F]{6}$")


class ManifestError(ValueError):
    """Manifest could not be parsed or a sample violates the schema."""

    def __init__(self, message: str, sample_id: str | None = None, field: str | None = None):
        super().__init__(message)
        self.sample_id = sample_id
        self.field = field


class ExtractionError(RuntimeError):
    """Chart-table extraction failed (endpoint or unparseable response)."""


@dataclass(frozen=True)
class ChartColumn:
    name: str
    role: str
    unit: str | None = None


@dataclass(frozen=True)
class VisualMeta:
    series_colors: tuple[str, ...] = ()
    annotations: tuple[str, ...] = ()


@dataclass(frozen=True)
class ChartTable:
    title: str
    chart_kind: str
    columns: tuple[ChartColumn, ...]
    rows: tuple[tuple[object, ...], ...]
    visual_meta: VisualMeta = VisualMeta()

    def __post_init__(self):
        if self.chart_kind not in CHART_KINDS:
            raise ManifestError(f"unknown chart kind {self.chart_kind!r}", field="chart_kind")
        for col in self.columns:
            if col.role not in COLUMN_ROLES:
                raise ManifestError(f"unknown column role {col.role!r}", field="columns")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise ManifestError(
                    f"row {i} has {len(row)} cells, expected {len(self.columns)}",
                    field="rows",
                )
        for color in self.visual_meta.series_colors:
            if not _HEX_COLOR.match(color):
                raise ManifestError(f"bad series color {color!r}", field="series_colors")


@dataclass(frozen=True)
class Sample:
    id: str
    channel: str
    topic: str
    chart_kinds: tuple[str, ...]
    animation_categories: frozenset[str]
    intent: str
    transcript: str
    duration_s: float
    charts: tuple[ChartTable, ...]
    reference_images: tuple[str, ...] = ()
    source_url: str | None = None

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ManifestError("duration_s must be positive", self.id, "duration_s")
        if not self.intent.strip():
            raise ManifestError("intent must be nonempty", self.id, "intent")
        if not self.animation_categories:
            raise ManifestError("at least one animation category required", self.id, "animation_categories")
        unknown = self.animation_categories - ANIMATION_CATEGORIES
        if unknown:
            raise ManifestError(
                f"unknown animation category: {sorted(unknown)[0]}", self.id, "animation_categories"
            )
        for kind in self.chart_kinds:
            if kind not in CHART_KINDS:
                raise ManifestError(f"unknown chart kind {kind!r}", self.id, "chart_kinds")
        if not self.charts:
            raise ManifestError("at least one chart table required", self.id, "charts")

    @property
    def effective_chart_kind(self) -> str:
        """Single label for stats: the sample's one kind, or "multiple" when mixed."""
        kinds = set(self.chart_kinds)
        if len(kinds) == 1:
            return next(iter(kinds))
        return "multiple"


@dataclass(frozen=True)
class CorpusStats:
    sample_count: int
    channel_counts: dict[str, int]
    channel_pct: dict[str, float]
    topic_counts: dict[str, int]
    topic_pct: dict[str, float]
    chart_kind_counts: dict[str, int]
    chart_kind_pct: dict[str, float]
    category_counts: dict[str, int]
    category_pct: dict[str, float]
    category_tag_total: int
    duration_hist: dict[float, int]
    transcript_tokens: tuple[int, ...]
    intent_tokens: tuple[int, ...]


def _chart_table_from_obj(obj: dict, sample_id: str | None = None) -> ChartTable:
    try:
        meta = obj.get("visual_meta", {})
        return ChartTable(
            title=obj.get("title", ""),
            chart_kind=obj["chart_kind"],
            columns=tuple(
                ChartColumn(name=c["name"], role=c["role"], unit=c.get("unit"))
                for c in obj["columns"]
            ),
            rows=tuple(tuple(r) for r in obj["rows"]),
            visual_meta=VisualMeta(
                series_colors=tuple(meta.get("series_colors", ())),
                annotations=tuple(meta.get("annotations", ())),
            ),
        )
    except KeyError as exc:
        raise ManifestError(f"chart table missing field {exc}", sample_id, str(exc)) from exc


def _sample_from_obj(obj: dict) -> Sample:
    sample_id = obj.get("id")
    if not sample_id:
        raise ManifestError("sample missing id", field="id")
    try:
        return Sample(
            id=sample_id,
            channel=obj["channel"],
            topic=obj["topic"],
            chart_kinds=tuple(obj["chart_kinds"]),
            animation_categories=frozenset(obj["animation_categories"]),
            intent=obj["intent"],
            transcript=obj.get("transcript", ""),
            duration_s=float(obj["duration_s"]),
            charts=tuple(_chart_table_from_obj(c, sample_id) for c in obj["charts"]),
            reference_images=tuple(obj.get("reference_images", ())),
            source_url=obj.get("source_url"),
        )
    except KeyError as exc:
        raise ManifestError(f"sample {sample_id} missing field {exc}", sample_id, str(exc)) from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ManifestError):
            raise
        raise ManifestError(f"sample {sample_id}: {exc}", sample_id) from exc


def load_manifest(path: str | Path) -> list[Sample]:
    """Load and validate a manifest file; order and ids are preserved."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest does not parse: {exc}") from exc
    if not isinstance(raw, list):
        raise ManifestError("manifest must be an array of sample objects")
    samples = [_sample_from_obj(obj) for obj in raw]
    seen: set[str] = set()
    for s in samples:
        if s.id in seen:
            raise ManifestError(f"duplicate sample id {s.id!r}", s.id, "id")
        seen.add(s.id)
    return samples


def serialize_samples(samples: list[Sample]) -> str:
    """Inverse of load_manifest for valid sample lists."""

    def chart_obj(c: ChartTable) -> dict:
        return {
            "title": c.title,
            "chart_kind": c.chart_kind,
            "columns": [
                {"name": col.name, "role": col.role, **({"unit": col.unit} if col.unit else {})}
                for col in c.columns
            ],
            "rows": [list(r) for r in c.rows],
            "visual_meta": {
                "series_colors": list(c.visual_meta.series_colors),
                "annotations": list(c.visual_meta.annotations),
            },
        }

    out = []
    for s in samples:
        obj = {
            "id": s.id,
            "channel": s.channel,
            "topic": s.topic,
            "chart_kinds": list(s.chart_kinds),
            "animation_categories": sorted(s.animation_categories),
            "intent": s.intent,
            "transcript": s.transcript,
            "duration_s": s.duration_s,
            "charts": [chart_obj(c) for c in s.charts],
            "reference_images": list(s.reference_images),
        }
        if s.source_url is not None:
            obj["source_url"] = s.source_url
        out.append(obj)
    return json.dumps(out, indent=2)


def _token_count(text: str) -> int:
    return len(text.split())


def compute_stats(samples: list[Sample]) -> CorpusStats:
    """Deterministic per-dimension counts and percentages over a sample list.

    Channel, topic, and chart kind are single-label (percentages over the
    sample count); animation categories are multi-label (percentages over
    the total number of category tags).
    """
    if not samples:
        raise ValueError("compute_stats requires a nonempty sample list")
    n = len(samples)

    channel = Counter(s.channel for s in samples)
    topic = Counter(s.topic for s in samples)
    kinds = Counter(s.effective_chart_kind for s in samples)
    categories: Counter[str] = Counter()
    for s in samples:
        categories.update(s.animation_categories)
    tag_total = sum(categories.values())

    hist: Counter[float] = Counter()
    for s in samples:
        hist[(s.duration_s // DURATION_BIN_S) * DURATION_BIN_S] += 1

    def pct(counts: Counter[str], total: int) -> dict[str, float]:
        return {k: 100.0 * v / total for k, v in counts.items()}

    return CorpusStats(
        sample_count=n,
        channel_counts=dict(channel),
        channel_pct=pct(channel, n),
        topic_counts=dict(topic),
        topic_pct=pct(topic, n),
        chart_kind_counts=dict(kinds),
        chart_kind_pct=pct(kinds, n),
        category_counts=dict(categories),
        category_pct=pct(categories, tag_total),
        category_tag_total=tag_total,
        duration_hist=dict(sorted(hist.items())),
        transcript_tokens=tuple(_token_count(s.transcript) for s in samples),
        intent_tokens=tuple(_token_count(s.intent) for s in samples),
    )


_EXTRACT_INSTRUCTIONS = (
    "You are given one or more screenshots of a single animated chart clip. "
    "Extract the tabular data shown in the chart(s), together with visual "
    "metadata such as the colors of the different portions and any annotations. "
    "Respond with JSON only: an array of objects, each with fields "
    '"title", "chart_kind" (one of bar, line, pie, area, multiple, other), '
    '"columns" (array of {"name", "role", "unit"}; role is categorical, '
    "temporal, or quantitative), \"rows\" (array of cell arrays), and "
    '"visual_meta" ({"series_colors": ["#RRGGBB", ...], "annotations": [...]}).'
)


def _parse_tables(text: str) -> list[ChartTable]:
    cleaned = text.strip()
    fence = re.search(r"```(?:json)?\s*\n(.*?)```", cleaned, re.DOTALL)
    if fence:
        cleaned = fence.group(1)
    data = json.loads(cleaned)
    if isinstance(data, dict):
        data = [data]
    return [_chart_table_from_obj(obj) for obj in data]


def extract_chart_data(
    images: list[str | Path],
    endpoint: EndpointConfig,
    client: ChatClient | None = None,
) -> list[ChartTable]:
    """Extract chart tables from screenshots of one clip.

    All images are attached to a single request so the model can reconcile
    occluded or multi-segment views of the same chart.
    """
    if not images:
        raise ValueError("extract_chart_data requires at least one image")
    if not endpoint.supports_images:
        raise ValueError("endpoint does not support image input")
    client = client or ChatClient(endpoint)

    image_parts = []
    for ref in images:
        raw = Path(ref).read_bytes()
        mime = "image/png" if Path(ref).suffix.lower() == ".png" else "image/jpeg"
        image_parts.append((mime, base64.b64encode(raw).decode("ascii")))

    last_error: Exception | None = None
    for _ in range(2):  # one retry on an unparseable response
        try:
            reply = client.complete(
                [{"role": "user", "content": _EXTRACT_INSTRUCTIONS}], images=image_parts
            )
        except EndpointError:
            raise
        try:
            return _parse_tables(reply)
        except (json.JSONDecodeError, ManifestError, KeyError, TypeError) as exc:
            last_error = exc
    raise ExtractionError(f"response not parseable into table schema: {last_error}")
