"""Generation orchestration: single-shot prompting and the four-agent
plan / critique / code / verify loop over generic multimodal chat endpoints."""

from __future__ import annotations

import base64
import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import contract
from .corpus import ANIMATION_CATEGORIES, Sample
from .endpoints import ChatClient, EndpointConfig, EndpointError, digest
from .judge import _chart_data_text as chart_data_text
from .prompts import render_template

DEFAULT_MAX_ITERATIONS = 3
VIDEO_CRITIC_FRAME_COUNT = 8

PIPELINES = ("single_shot", "multi_agent", "no_critic")


class PlanError(ValueError):
    """Director output unparseable or violating plan invariants."""


@dataclass(frozen=True)
class PlanScene:
    start_ms: int
    end_ms: int
    description: str
    strategy: str


@dataclass(frozen=True)
class Subtitle:
    start_ms: int
    end_ms: int
    text: str


@dataclass(frozen=True)
class AnimationPlan:
    scenes: tuple[PlanScene, ...]
    subtitles: tuple[Subtitle, ...]
    layout_notes: str = ""

    def check(self, duration_s: float):
        limit = duration_s * 1000
        for i, sc in enumerate(self.scenes):
            if not (0 <= sc.start_ms < sc.end_ms <= limit):
                raise PlanError(f"scenes[{i}]: interval [{sc.start_ms}, {sc.end_ms}] outside [0, {limit:g}]")
            if sc.strategy not in ANIMATION_CATEGORIES:
                raise PlanError(f"scenes[{i}].strategy: unknown strategy {sc.strategy!r}")
        if not self.subtitles:
            raise PlanError("subtitles: must be nonempty")
        for i, sub in enumerate(self.subtitles):
            if not (0 <= sub.start_ms < sub.end_ms <= limit):
                raise PlanError(f"subtitles[{i}]: interval [{sub.start_ms}, {sub.end_ms}] outside [0, {limit:g}]")
        ordered = sorted(self.subtitles, key=lambda s: s.start_ms)
        for a, b in zip(ordered, ordered[1:]):
            if b.start_ms < a.end_ms:
                raise PlanError(f"subtitles: intervals [{a.start_ms},{a.end_ms}] and [{b.start_ms},{b.end_ms}] overlap")

    def to_json(self) -> str:
        return json.dumps(
            {
                "scenes": [
                    {"start": s.start_ms, "end": s.end_ms, "description": s.description, "strategy": s.strategy}
                    for s in self.scenes
                ],
                "subtitles": [
                    {"start": s.start_ms, "end": s.end_ms, "text": s.text} for s in self.subtitles
                ],
                "layout_notes": self.layout_notes,
            },
            indent=2,
        )


@dataclass
class ReelArtifact:
    doc: str
    pipeline: str
    model_id: str
    iteration: int
    contract_report: contract.ContractReport
    plan: AnimationPlan | None = None


@dataclass(frozen=True)
class TraceEvent:
    agent: str  # director | plan_critic | coder | video_critic | single
    prompt_digest: str
    response_digest: str
    latency_ms: int


@dataclass
class PipelineTrace:
    events: list[TraceEvent] = field(default_factory=list)
    iterations: int = 0
    final_status: str = "failed"  # verified | unverified | failed

    def record(self, agent: str, prompt: str, response: str, latency_ms: int = 0):
        self.events.append(TraceEvent(agent, digest(prompt), digest(response), latency_ms))


def _call(client: ChatClient, trace: PipelineTrace, agent: str, prompt: str,
          images: list[tuple[str, str]] | None = None, clock=time.monotonic) -> str:
    t0 = clock()
    reply = client.complete([{"role": "user", "content": prompt}], images=images)
    trace.record(agent, prompt, reply, int((clock() - t0) * 1000))
    return reply


def _reference_image_parts(sample: Sample) -> list[tuple[str, str]]:
    parts = []
    for ref in sample.reference_images:
        p = Path(ref)
        if p.is_file():
            mime = "image/png" if p.suffix.lower() == ".png" else "image/jpeg"
            parts.append((mime, base64.b64encode(p.read_bytes()).decode("ascii")))
    return parts


def _validated_artifact(raw: str, pipeline: str, model_id: str, iteration: int,
                        plan: AnimationPlan | None = None) -> ReelArtifact:
    try:
        doc = contract.strip_wrapper(raw)
    except contract.NoDocumentError as exc:
        report = contract.ContractReport(artifact_id="")
        report.violations.append(contract.Violation("R1", str(exc)))
        return ReelArtifact(doc="", pipeline=pipeline, model_id=model_id,
                            iteration=iteration, contract_report=report, plan=plan)
    report = contract.validate(doc)
    return ReelArtifact(doc=doc, pipeline=pipeline, model_id=model_id,
                        iteration=iteration, contract_report=report, plan=plan)


def generate_single_shot(sample: Sample, endpoint: EndpointConfig,
                         client: ChatClient | None = None) -> tuple[ReelArtifact, PipelineTrace]:
    """One-prompt generation of the full animation document."""
    client = client or ChatClient(endpoint)
    trace = PipelineTrace()
    prompt = render_template(
        "generator",
        intent=sample.intent,
        data=chart_data_text(sample),
        duration=sample.duration_s,
        chart_count=len(sample.charts),
        image_count=len(sample.reference_images),
    )
    images = _reference_image_parts(sample)
    try:
        raw = _call(client, trace, "single", prompt, images or None)
    except EndpointError:
        trace.final_status = "failed"
        raise
    artifact = _validated_artifact(raw, "single_shot", endpoint.model_id, 0)
    trace.final_status = "unverified" if artifact.contract_report.passed else "failed"
    return artifact, trace


def _parse_plan(text: str) -> AnimationPlan:
    cleaned = text.strip()
    fence = re.search(r"```(?:json)?\s*\n(.*?)```", cleaned, re.DOTALL)
    if fence:
        cleaned = fence.group(1)
    start, end = cleaned.find("{"), cleaned.rfind("}")
    if start < 0 or end < start:
        raise PlanError("no JSON object in director reply")
    obj = json.loads(cleaned[start : end + 1])
    try:
        return AnimationPlan(
            scenes=tuple(
                PlanScene(int(s["start"]), int(s["end"]), str(s.get("description", "")),
                          str(s.get("strategy", "Emphasis")))
                for s in obj.get("scenes", [])
            ),
            subtitles=tuple(
                Subtitle(int(s["start"]), int(s["end"]), str(s["text"]))
                for s in obj.get("subtitles", [])
            ),
            layout_notes=str(obj.get("layout_notes", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PlanError(f"plan schema: {exc}") from exc


def run_director(sample: Sample, endpoint: EndpointConfig,
                 client: ChatClient | None = None, trace: PipelineTrace | None = None) -> AnimationPlan:
    """Ask the director for a scene-by-scene plan with subtitles; one reparse retry."""
    client = client or ChatClient(endpoint)
    trace = trace if trace is not None else PipelineTrace()
    prompt = render_template(
        "director",
        intent=sample.intent,
        data=chart_data_text(sample),
        duration=sample.duration_s,
    )
    images = _reference_image_parts(sample)
    last: Exception | None = None
    for _ in range(2):
        reply = _call(client, trace, "director", prompt, images or None)
        try:
            plan = _parse_plan(reply)
            plan.check(sample.duration_s)
            return plan
        except PlanError as exc:
            last = exc
        except json.JSONDecodeError as exc:
            last = exc
    raise PlanError(f"director failed: {last}")


def run_plan_critic(sample: Sample, plan: AnimationPlan, endpoint: EndpointConfig,
                    client: ChatClient | None = None, trace: PipelineTrace | None = None) -> str:
    """Free-text critique of the plan, captured verbatim for the coder."""
    client = client or ChatClient(endpoint)
    trace = trace if trace is not None else PipelineTrace()
    prompt = render_template(
        "plan_critic",
        intent=sample.intent,
        data=chart_data_text(sample),
        duration=sample.duration_s,
        plan=plan.to_json(),
    )
    images = _reference_image_parts(sample)
    return _call(client, trace, "plan_critic", prompt, images or None)


def run_coder(plan: AnimationPlan, feedback: str, sample: Sample, endpoint: EndpointConfig,
              client: ChatClient | None = None, trace: PipelineTrace | None = None,
              pipeline: str = "multi_agent", iteration: int = 0) -> ReelArtifact:
    """Generate the document from the plan; one self-repair round on contract failure."""
    client = client or ChatClient(endpoint)
    trace = trace if trace is not None else PipelineTrace()
    images = _reference_image_parts(sample)

    def invoke(fb: str) -> ReelArtifact:
        prompt = render_template("coder", duration=sample.duration_s, plan=plan.to_json(), feedback=fb)
        raw = _call(client, trace, "coder", prompt, images or None)
        return _validated_artifact(raw, pipeline, endpoint.model_id, iteration, plan)

    artifact = invoke(feedback or "(no feedback)")
    if artifact.contract_report.passed:
        return artifact
    repair_notes = "\n".join(
        f"[{v.rule_id}] {v.message}" for v in artifact.contract_report.violations
    )
    retry = invoke((feedback or "") + "\nContract violations to fix:\n" + repair_notes)
    return retry


def run_video_critic(sample: Sample, frames, endpoint: EndpointConfig,
                     client: ChatClient | None = None, trace: PipelineTrace | None = None) -> str | None:
    """Show sampled frames to the critic. Returns None on PASS, else the feedback text.

    The PASS prefix is case-sensitive, checked after leading whitespace.
    """
    client = client or ChatClient(endpoint)
    trace = trace if trace is not None else PipelineTrace()
    prompt = render_template(
        "video_critic", intent=sample.intent, data=chart_data_text(sample)
    )
    images = [("image/png", base64.b64encode(buf).decode("ascii")) for buf in sample_frames(frames)]
    reply = _call(client, trace, "video_critic", prompt, images or None)
    if reply.lstrip().startswith("PASS"):
        return None
    return reply


def sample_frames(frames) -> list[bytes]:
    """Uniformly sample frames for the critic, always keeping first and last."""
    buffers = frames.frame_bytes() if hasattr(frames, "frame_bytes") else list(frames)
    n = len(buffers)
    if n <= VIDEO_CRITIC_FRAME_COUNT:
        return buffers
    idx = sorted({round(i * (n - 1) / (VIDEO_CRITIC_FRAME_COUNT - 1)) for i in range(VIDEO_CRITIC_FRAME_COUNT)} | {0, n - 1})
    return [buffers[i] for i in idx]


@dataclass
class PipelineClients:
    """One client per agent role. Roles may share an endpoint."""

    director: ChatClient
    plan_critic: ChatClient
    coder: ChatClient
    video_critic: ChatClient


def run_pipeline(
    sample: Sample,
    clients: PipelineClients,
    model_id: str,
    renderer=None,
    mode: str = "multi_agent",
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> tuple[ReelArtifact, PipelineTrace]:
    """Director -> plan critic -> coder -> validate -> render -> video critic,
    re-invoking the coder with accumulated feedback until PASS or the cap.

    In no_critic mode both critics are skipped and a single coder round runs.
    ``renderer`` is a callable doc -> FrameSequence; when None (or in no_critic
    mode) the video-critic stage is skipped.
    """
    if mode not in ("multi_agent", "no_critic"):
        raise ValueError(f"run_pipeline mode must be multi_agent or no_critic, got {mode!r}")
    trace = PipelineTrace()
    use_critics = mode == "multi_agent"

    try:
        plan = run_director(sample, clients.director.config, clients.director, trace)
        feedback = ""
        if use_critics:
            critique = run_plan_critic(sample, plan, clients.plan_critic.config, clients.plan_critic, trace)
            feedback = critique.strip()

        artifact = None
        for iteration in range(max_iterations):
            trace.iterations = iteration + 1
            artifact = run_coder(plan, feedback, sample, clients.coder.config, clients.coder,
                                 trace, pipeline=mode, iteration=iteration)
            if not artifact.contract_report.passed:
                trace.final_status = "failed"
                return artifact, trace
            if not use_critics or renderer is None:
                break
            frames = renderer(artifact.doc, sample.duration_s)
            verdict = run_video_critic(sample, frames, clients.video_critic.config,
                                       clients.video_critic, trace)
            if verdict is None:
                trace.final_status = "verified"
                return artifact, trace
            feedback = (feedback + "\n" + verdict).strip()
        trace.final_status = "unverified"
        return artifact, trace
    except (EndpointError, PlanError):
        trace.final_status = "failed"
        raise
