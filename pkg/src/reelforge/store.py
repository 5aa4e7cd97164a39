"""Run configuration and run-directory persistence.

Layout: runs/<run_id>/<sample_id>/{artifact.html, report.json, plan.json,
trace.jsonl, frames/%05d.png, reel.mp4, scores.json, verdicts.jsonl} with an
append-only events.jsonl at the run root. All writes are atomic
(temp file + rename) and never contain secret material.
"""

from __future__ import annotations

import dataclasses
import json
import os
import secrets
import tempfile
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import contract
from .agents import AnimationPlan, PipelineTrace, PlanScene, ReelArtifact, Subtitle, TraceEvent
from .endpoints import EndpointConfig
from .renderer import FrameSequence, RenderSettings, frame_digest

ENDPOINT_ROLES = (
    "generator",
    "director",
    "plan_critic",
    "coder",
    "video_critic",
    "html_judge",
    "pair_judge",
)


class ConfigError(ValueError):
    pass


class StoreError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunPaths:
    manifest: Path
    output_root: Path
    browser_binary: str | None = None
    encoder: str | None = None


@dataclass(frozen=True)
class RunConfig:
    endpoints: dict[str, EndpointConfig]
    pipeline: str
    render: RenderSettings
    max_iterations: int
    blind_seed: int
    paths: RunPaths

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"unreadable config {path}: {exc}") from exc
        try:
            endpoints = {
                role: EndpointConfig(**cfg) for role, cfg in raw.get("endpoints", {}).items()
            }
            for role in endpoints:
                if role not in ENDPOINT_ROLES:
                    raise ConfigError(f"unknown endpoint role {role!r}")
            render_raw = dict(raw.get("render", {}))
            browser = render_raw.pop("browser_binary", None) or raw.get("paths", {}).get("browser_binary")
            encoder = render_raw.pop("encoder_path", None) or raw.get("paths", {}).get("encoder")
            paths_raw = raw.get("paths", {})
            return cls(
                endpoints=endpoints,
                pipeline=raw.get("pipeline", "single_shot"),
                render=RenderSettings(browser_binary=browser, encoder_path=encoder, **render_raw),
                max_iterations=int(raw.get("max_iterations", 3)),
                blind_seed=int(raw.get("blind_seed", 0)),
                paths=RunPaths(
                    manifest=Path(paths_raw.get("manifest", "manifest.json")),
                    output_root=Path(paths_raw.get("output_root", "runs")),
                    browser_binary=browser,
                    encoder=encoder,
                ),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config {path}: {exc}") from exc

    def endpoint(self, role: str) -> EndpointConfig:
        if role not in self.endpoints:
            raise ConfigError(f"config does not define an endpoint for role {role!r}")
        return self.endpoints[role]


def _atomic_write(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def new_run_id(now: datetime | None = None) -> str:
    now = now or datetime.now(timezone.utc)
    return now.strftime("%Y%m%dT%H%M%SZ") + "-" + secrets.token_hex(3)


def create_run_dir(output_root: str | Path, run_id: str | None = None) -> Path:
    """Create a fresh run directory; on run_id collision the random suffix is
    regenerated once, then an error is raised."""
    output_root = Path(output_root)
    attempts = [run_id] if run_id else [new_run_id(), new_run_id()]
    if run_id:
        attempts.append(new_run_id())
    last = None
    for candidate in attempts:
        path = output_root / candidate
        try:
            path.mkdir(parents=True, exist_ok=False)
            return path
        except FileExistsError:
            last = candidate
    raise StoreError(f"run id collision persists: {last}")


def _trace_lines(trace: PipelineTrace) -> str:
    lines = [json.dumps(dataclasses.asdict(ev)) for ev in trace.events]
    lines.append(json.dumps({"iterations": trace.iterations, "final_status": trace.final_status}))
    return "\n".join(lines) + "\n"


def _parse_trace(text: str) -> PipelineTrace:
    trace = PipelineTrace()
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if "final_status" in obj:
            trace.iterations = obj["iterations"]
            trace.final_status = obj["final_status"]
        else:
            trace.events.append(TraceEvent(**obj))
    return trace


def _report_obj(artifact: ReelArtifact, frames: FrameSequence | None) -> dict:
    obj = {
        "artifact_id": artifact.contract_report.artifact_id,
        "pipeline": artifact.pipeline,
        "model_id": artifact.model_id,
        "iteration": artifact.iteration,
        "passed": artifact.contract_report.passed,
        "violations": [dataclasses.asdict(v) for v in artifact.contract_report.violations],
        "warnings": [dataclasses.asdict(v) for v in artifact.contract_report.warnings],
    }
    if frames is not None:
        obj["render"] = {
            "fps": frames.fps,
            "duration_s": frames.duration_s,
            "timestamps_ms": list(frames.timestamps_ms),
            "digests": list(frames.digests),
        }
    return obj


@dataclass
class SampleRecord:
    sample_id: str
    artifact: ReelArtifact | None = None
    trace: PipelineTrace | None = None
    frames: FrameSequence | None = None
    scores: dict | None = None
    verdicts: list[dict] = field(default_factory=list)


@dataclass
class RunRecord:
    run_id: str
    path: Path
    samples: dict[str, SampleRecord]
    events: list[dict]


class RunWriter:
    """Single writer per run directory; sample workers write only inside their
    own sample subdirectory while the event log is guarded by one lock."""

    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)
        self._event_lock = threading.Lock()

    def append_event(self, event: dict):
        with self._event_lock:
            with open(self.run_dir / "events.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event) + "\n")

    def write_sample(self, record: SampleRecord):
        sdir = self.run_dir / record.sample_id
        sdir.mkdir(parents=True, exist_ok=True)
        if record.artifact is not None:
            _atomic_write(sdir / "artifact.html", record.artifact.doc.encode("utf-8"))
            _atomic_write(
                sdir / "report.json",
                json.dumps(_report_obj(record.artifact, record.frames), indent=2).encode("utf-8"),
            )
            if record.artifact.plan is not None:
                _atomic_write(sdir / "plan.json", record.artifact.plan.to_json().encode("utf-8"))
        if record.trace is not None:
            _atomic_write(sdir / "trace.jsonl", _trace_lines(record.trace).encode("utf-8"))
        if record.frames is not None:
            record.frames.write_frames(sdir / "frames")
        if record.scores is not None:
            _atomic_write(sdir / "scores.json", json.dumps(record.scores, indent=2).encode("utf-8"))
        if record.verdicts:
            lines = "".join(json.dumps(v) + "\n" for v in record.verdicts)
            _atomic_write(sdir / "verdicts.jsonl", lines.encode("utf-8"))
        self.append_event({"stage": "persisted", "sample_id": record.sample_id})


def persist_run(output_root: str | Path, records: list[SampleRecord],
                run_id: str | None = None) -> RunRecord:
    run_dir = create_run_dir(output_root, run_id)
    writer = RunWriter(run_dir)
    for record in records:
        writer.write_sample(record)
    return load_run(run_dir)


def _parse_plan_file(text: str) -> AnimationPlan:
    obj = json.loads(text)
    return AnimationPlan(
        scenes=tuple(
            PlanScene(s["start"], s["end"], s.get("description", ""), s.get("strategy", "Emphasis"))
            for s in obj.get("scenes", [])
        ),
        subtitles=tuple(Subtitle(s["start"], s["end"], s["text"]) for s in obj.get("subtitles", [])),
        layout_notes=obj.get("layout_notes", ""),
    )


def load_run(path: str | Path) -> RunRecord:
    """Load a persisted run, re-verifying stored frame digests."""
    run_dir = Path(path)
    if not run_dir.is_dir():
        raise StoreError(f"no run directory at {run_dir}")
    events_path = run_dir / "events.jsonl"
    if not events_path.is_file():
        raise StoreError(f"missing events.jsonl in {run_dir}")
    events = [json.loads(line) for line in events_path.read_text(encoding="utf-8").splitlines() if line.strip()]

    samples: dict[str, SampleRecord] = {}
    for sdir in sorted(p for p in run_dir.iterdir() if p.is_dir()):
        record = SampleRecord(sample_id=sdir.name)
        report_path = sdir / "report.json"
        report_obj = None
        if report_path.is_file():
            report_obj = json.loads(report_path.read_text(encoding="utf-8"))
            doc_path = sdir / "artifact.html"
            if not doc_path.is_file():
                raise StoreError(f"missing artifact.html for sample {sdir.name}")
            doc = doc_path.read_text(encoding="utf-8")
            stored = contract.ContractReport(
                artifact_id=report_obj.get("artifact_id", ""),
                violations=[contract.Violation(**v) for v in report_obj["violations"]],
                warnings=[contract.Violation(**v) for v in report_obj["warnings"]],
            )
            plan = None
            plan_path = sdir / "plan.json"
            if plan_path.is_file():
                plan = _parse_plan_file(plan_path.read_text(encoding="utf-8"))
            record.artifact = ReelArtifact(
                doc=doc,
                pipeline=report_obj["pipeline"],
                model_id=report_obj["model_id"],
                iteration=report_obj["iteration"],
                contract_report=stored,
                plan=plan,
            )
            # persisted artifacts must still validate as recorded
            if doc and contract.validate(doc).passed != stored.passed:
                raise StoreError(f"artifact.html for {sdir.name} no longer matches its stored report")

        trace_path = sdir / "trace.jsonl"
        if trace_path.is_file():
            record.trace = _parse_trace(trace_path.read_text(encoding="utf-8"))

        if report_obj and "render" in report_obj:
            render_obj = report_obj["render"]
            frame_dir = sdir / "frames"
            buffers = []
            for k, digest in enumerate(render_obj["digests"]):
                fpath = frame_dir / ("%05d.png" % k)
                if not fpath.is_file():
                    raise StoreError(f"missing frame file {fpath.name} for sample {sdir.name}")
                data = fpath.read_bytes()
                if frame_digest(data) != digest:
                    raise StoreError(f"digest mismatch on frame {fpath.name} of sample {sdir.name}")
                buffers.append(data)
            record.frames = FrameSequence(
                frames=tuple(buffers),
                timestamps_ms=tuple(render_obj["timestamps_ms"]),
                digests=tuple(render_obj["digests"]),
                fps=render_obj["fps"],
                duration_s=render_obj["duration_s"],
            )

        scores_path = sdir / "scores.json"
        if scores_path.is_file():
            record.scores = json.loads(scores_path.read_text(encoding="utf-8"))
        verdicts_path = sdir / "verdicts.jsonl"
        if verdicts_path.is_file():
            record.verdicts = [
                json.loads(line)
                for line in verdicts_path.read_text(encoding="utf-8").splitlines()
                if line.strip()
            ]
        samples[sdir.name] = record

    return RunRecord(run_id=run_dir.name, path=run_dir, samples=samples, events=events)
