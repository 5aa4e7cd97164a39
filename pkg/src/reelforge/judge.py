"""Evaluation protocols: 0-5 rubric scoring of documents, blind pairwise video
comparison, tallies, and human/judge agreement analytics."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .endpoints import ChatClient, EndpointConfig
from .prompts import render_template

CRITERIA_HTML = (
    "narrative_quality",
    "informativeness",
    "subtitle_transcript_similarity",
    "code_correctness",
)
CRITERIA_PAIR = (
    "visualization_quality",
    "subtitle_animation_coherence",
    "style_consistency",
)
LABELS = ("A", "B", "tie")


class JudgeParseError(RuntimeError):
    """Judge reply could not be parsed after a retry, or a value was out of range."""


class AlignmentError(ValueError):
    """Judgment lists are misaligned (length or sample-id mismatch)."""


@dataclass(frozen=True)
class HtmlScores:
    narrative_quality: int
    informativeness: int
    subtitle_transcript_similarity: int
    code_correctness: int

    def __post_init__(self):
        for name in CRITERIA_HTML:
            v = getattr(self, name)
            if not isinstance(v, int) or not 0 <= v <= 5:
                raise JudgeParseError(f"{name} score {v!r} outside 0-5")

    @property
    def overall(self) -> float:
        return sum(getattr(self, name) for name in CRITERIA_HTML) / 4.0


@dataclass(frozen=True)
class PairVerdict:
    per_criterion: dict[str, str]
    overall: str
    blind_map: dict[str, str]  # presented slot -> true identity
    rationale: str = ""

    def __post_init__(self):
        for crit in CRITERIA_PAIR:
            if self.per_criterion.get(crit) not in LABELS:
                raise JudgeParseError(f"missing or bad label for {crit}")
        if self.overall not in LABELS:
            raise JudgeParseError(f"bad overall label {self.overall!r}")
        if sorted(self.blind_map) != ["A", "B"] or sorted(self.blind_map.values()) != ["A", "B"]:
            raise JudgeParseError("blind_map must be a bijection over {A, B}")


@dataclass(frozen=True)
class AgreementRow:
    matches: int
    n: int

    @property
    def pct(self) -> float | None:
        return None if self.n == 0 else 100.0 * self.matches / self.n


@dataclass(frozen=True)
class AgreementReport:
    per_criterion: dict[str, AgreementRow]
    overall: AgreementRow


def _extract_json(text: str) -> dict:
    cleaned = text.strip()
    fence = re.search(r"```(?:json)?\s*\n(.*?)```", cleaned, re.DOTALL)
    if fence:
        cleaned = fence.group(1)
    start = cleaned.find("{")
    end = cleaned.rfind("}")
    if start < 0 or end < start:
        raise JudgeParseError("no JSON object in reply")
    return json.loads(cleaned[start : end + 1])


def judge_html(sample, doc: str, endpoint: EndpointConfig, client: ChatClient | None = None) -> HtmlScores:
    """Score one generated document on the four 0-5 rubric criteria."""
    if not doc.strip():
        raise ValueError("artifact document is empty")
    client = client or ChatClient(endpoint)
    prompt = render_template(
        "html_judge",
        sample_id=sample.id,
        intent=sample.intent,
        transcript=sample.transcript,
        data=_chart_data_text(sample),
        html=doc,
    )
    last: Exception | None = None
    for _ in range(2):  # one reparse retry
        reply = client.complete([{"role": "user", "content": prompt}])
        try:
            obj = _extract_json(reply)
            return HtmlScores(**{name: int(obj[name]) for name in CRITERIA_HTML})
        except JudgeParseError as exc:
            if "outside 0-5" in str(exc):
                raise
            last = exc
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            last = exc
    raise JudgeParseError(f"unparseable judge reply: {last}")


def _chart_data_text(sample) -> str:
    parts = []
    for chart in sample.charts:
        header = [c.name for c in chart.columns]
        lines = [f"# {chart.title} ({chart.chart_kind})", " | ".join(header)]
        lines += [" | ".join(str(cell) for cell in row) for row in chart.rows]
        parts.append("\n".join(lines))
    return "\n\n".join(parts)


def judge_pair(
    sample,
    video_a,
    video_b,
    reference_image,
    endpoint: EndpointConfig,
    rng_seed: int,
    client: ChatClient | None = None,
) -> PairVerdict:
    """Blind pairwise comparison. Slot order is randomized by seed; the verdict
    is mapped back to true identities before returning."""
    client = client or ChatClient(endpoint)
    rng = random.Random(rng_seed)
    swapped = rng.random() < 0.5
    # presented slot -> true identity
    blind_map = {"A": "B", "B": "A"} if swapped else {"A": "A", "B": "B"}
    first, second = (video_b, video_a) if swapped else (video_a, video_b)

    prompt = render_template("pairwise_judge", sample_id=sample.id)
    images = [("image/png", img) for img in (first, second, reference_image) if img is not None]
    last: Exception | None = None
    for _ in range(2):
        reply = client.complete([{"role": "user", "content": prompt}], images=images)
        try:
            obj = _extract_json(reply)
            per = {crit: str(obj[crit]) for crit in CRITERIA_PAIR}
            overall = str(obj["overall"]) if "overall" in obj else derive_overall(per)
            rationale = str(obj.get("rationale", ""))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            last = exc
            continue
        try:
            return PairVerdict(
                per_criterion={c: _map_back(v, blind_map) for c, v in per.items()},
                overall=_map_back(overall, blind_map),
                blind_map=blind_map,
                rationale=rationale,
            )
        except JudgeParseError as exc:
            last = exc
    raise JudgeParseError(f"unparseable pairwise verdict: {last}")


def _map_back(label: str, blind_map: dict[str, str]) -> str:
    return blind_map.get(label, label)


def derive_overall(per_criterion: dict[str, str]) -> str:
    """Winner is the side with strictly more criterion wins; equal wins is a tie."""
    wins_a = sum(1 for v in per_criterion.values() if v == "A")
    wins_b = sum(1 for v in per_criterion.values() if v == "B")
    if wins_a > wins_b:
        return "A"
    if wins_b > wins_a:
        return "B"
    return "tie"


@dataclass(frozen=True)
class TallyRow:
    wins: int
    losses: int
    ties: int


def tally(verdicts: list[PairVerdict]) -> dict[str, TallyRow]:
    """Win/loss/tie counts for the A side, per criterion and overall."""
    if not verdicts:
        raise ValueError("tally requires at least one verdict")

    def row(labels: list[str]) -> TallyRow:
        return TallyRow(
            wins=labels.count("A"), losses=labels.count("B"), ties=labels.count("tie")
        )

    out = {crit: row([v.per_criterion[crit] for v in verdicts]) for crit in CRITERIA_PAIR}
    out["overall"] = row([v.overall for v in verdicts])
    return out


def load_judgment_file(path: str | Path) -> list[tuple[str, dict]]:
    """Parse a jsonl judgment record file into aligned (sample_id, labels)
    tuples; each record carries every pairwise criterion plus "overall"."""
    records: list[tuple[str, dict]] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        try:
            labels = {crit: obj[crit] for crit in CRITERIA_PAIR}
            labels["overall"] = obj["overall"]
            sample_id = obj["sample_id"]
        except KeyError as exc:
            raise AlignmentError(f"{path}:{lineno} missing field {exc}") from exc
        for key, value in labels.items():
            if value not in LABELS:
                raise AlignmentError(f"{path}:{lineno} bad label {value!r} for {key}")
        records.append((sample_id, labels))
    return records


def _check_alignment(a: list[tuple[str, dict]], b: list[tuple[str, dict]]):
    if len(a) != len(b):
        raise AlignmentError(f"length mismatch: {len(a)} vs {len(b)}")
    for (ida, _), (idb, _) in zip(a, b):
        if ida != idb:
            raise AlignmentError(f"sample id mismatch: {ida!r} vs {idb!r}")


def agreement(judgments_a: list[tuple[str, dict]], judgments_b: list[tuple[str, dict]]) -> AgreementReport:
    """Percentage of identical labels between two aligned judgment lists.

    Each judgment is (sample_id, labels) where labels maps each pairwise
    criterion plus "overall" to a label in {A, B, tie}.
    """
    _check_alignment(judgments_a, judgments_b)

    def row(key: str) -> AgreementRow:
        n = len(judgments_a)
        matches = sum(
            1 for (_, la), (_, lb) in zip(judgments_a, judgments_b) if la[key] == lb[key]
        )
        return AgreementRow(matches=matches, n=n)

    return AgreementReport(
        per_criterion={crit: row(crit) for crit in CRITERIA_PAIR}, overall=row("overall")
    )


def consensus_agreement(
    human1: list[tuple[str, dict]],
    human2: list[tuple[str, dict]],
    machine: list[tuple[str, dict]],
) -> AgreementReport:
    """Machine agreement restricted to samples where both humans gave the same
    label; n is reported per criterion."""
    _check_alignment(human1, human2)
    _check_alignment(human1, machine)

    def row(key: str) -> AgreementRow:
        idx = [i for i in range(len(human1)) if human1[i][1][key] == human2[i][1][key]]
        matches = sum(1 for i in idx if machine[i][1][key] == human1[i][1][key])
        return AgreementRow(matches=matches, n=len(idx))

    return AgreementReport(
        per_criterion={crit: row(crit) for crit in CRITERIA_PAIR}, overall=row("overall")
    )


@dataclass(frozen=True)
class ScoreMeans:
    narrative_quality: float
    informativeness: float
    subtitle_transcript_similarity: float
    code_correctness: float
    overall: float


def aggregate_scores(groups: dict[str, list[HtmlScores]]) -> dict[str, ScoreMeans]:
    """Arithmetic mean per criterion and overall for each model group,
    rounded to 2 decimals for display."""
    out = {}
    for model, scores in groups.items():
        if not scores:
            raise ValueError(f"empty score group for model {model!r}")
        n = len(scores)
        means = {
            name: round(sum(getattr(s, name) for s in scores) / n, 2) for name in CRITERIA_HTML
        }
        means["overall"] = round(sum(s.overall for s in scores) / n, 2)
        out[model] = ScoreMeans(**means)
    return out
