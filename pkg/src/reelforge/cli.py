"""Command-line surface binding all modules into reproducible runs.

Exit codes: 0 success, 1 one or more samples failed, 2 usage/config errors.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from . import agents, contract, corpus, judge
from .endpoints import ChatClient
from .renderer import RenderSettings, assemble, render
from .store import ConfigError, RunConfig, RunWriter, SampleRecord, create_run_dir

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


def _select_samples(samples, args):
    if getattr(args, "sample", None):
        wanted = set(args.sample)
        samples = [s for s in samples if s.id in wanted]
        missing = wanted - {s.id for s in samples}
        if missing:
            raise ConfigError(f"unknown sample ids: {sorted(missing)}")
    if getattr(args, "shuffle_seed", None) is not None:
        rng = random.Random(args.shuffle_seed)
        samples = samples[:]
        rng.shuffle(samples)
    if getattr(args, "limit", None):
        samples = samples[: args.limit]
    return samples


def cmd_validate(args) -> int:
    raw = Path(args.infile).read_text(encoding="utf-8")
    try:
        doc = contract.strip_wrapper(raw)
    except contract.NoDocumentError as exc:
        print(f"FAIL: {exc}")
        return EXIT_PARTIAL
    report = contract.validate(doc, artifact_id=args.infile)
    for v in report.violations:
        print(f"{v.rule_id} error  line {v.line}: {v.message}")
    for v in report.warnings:
        print(f"{v.rule_id} warn   line {v.line}: {v.message}")
    print(f"{'PASS' if report.passed else 'FAIL'}: {args.infile} "
          f"({len(report.violations)} errors, {len(report.warnings)} warnings)")
    return EXIT_OK if report.passed else EXIT_PARTIAL


def cmd_stats(args) -> int:
    samples = corpus.load_manifest(args.manifest)
    stats = corpus.compute_stats(samples)
    print(f"samples: {stats.sample_count}")
    for title, counts, pcts in (
        ("channel", stats.channel_counts, stats.channel_pct),
        ("topic", stats.topic_counts, stats.topic_pct),
        ("chart kind", stats.chart_kind_counts, stats.chart_kind_pct),
        ("animation category", stats.category_counts, stats.category_pct),
    ):
        print(f"\n{title}:")
        for name, count in sorted(counts.items(), key=lambda kv: -kv[1]):
            print(f"  {name:<28} {count:>4}  {pcts[name]:.1f}%")
    print(f"\nanimation tags total: {stats.category_tag_total}")
    print("\nduration histogram (5 s bins):")
    for start, count in stats.duration_hist.items():
        print(f"  {start:>5.0f}-{start + corpus.DURATION_BIN_S:<5.0f} {count}")
    mean = lambda xs: sum(xs) / len(xs)
    print(f"\ntranscript tokens: mean {mean(stats.transcript_tokens):.1f}")
    print(f"intent tokens: mean {mean(stats.intent_tokens):.1f}")
    return EXIT_OK


def cmd_render(args) -> int:
    raw = Path(args.infile).read_text(encoding="utf-8")
    doc = contract.strip_wrapper(raw)
    report = contract.validate(doc, artifact_id=args.infile)
    if not report.passed:
        print(f"FAIL: {args.infile} violates the contract; refusing to render")
        for v in report.violations:
            print(f"  {v.rule_id}: {v.message}")
        return EXIT_PARTIAL
    settings = RenderSettings(fps=args.fps, browser_binary=args.browser, encoder_path=args.encoder)
    frames = render(doc, args.duration, settings)
    out_dir = Path(args.out)
    frames.write_frames(out_dir / "frames")
    (out_dir / "digests.json").write_text(
        json.dumps({"fps": frames.fps, "duration_s": frames.duration_s,
                    "digests": list(frames.digests)}, indent=2),
        encoding="utf-8",
    )
    print(f"rendered {len(frames.frames)} frames at {frames.fps} fps into {out_dir}")
    if args.mp4:
        out = assemble(frames, args.mp4, settings)
        print(f"encoded {out}")
    return EXIT_OK


def cmd_agree(args) -> int:
    a = judge.load_judgment_file(args.a)
    b = judge.load_judgment_file(args.b)
    if args.consensus:
        machine = judge.load_judgment_file(args.consensus)
        report = judge.consensus_agreement(a, b, machine)
        print("consensus agreement (machine vs human consensus):")
    else:
        report = judge.agreement(a, b)
        print("agreement:")
    for crit, row in report.per_criterion.items():
        pct = "n/a" if row.pct is None else f"{row.pct:.1f}%"
        print(f"  {crit:<30} {pct} (n={row.n})")
    pct = "n/a" if report.overall.pct is None else f"{report.overall.pct:.1f}%"
    print(f"  {'overall':<30} {pct} (n={report.overall.n})")
    return EXIT_OK


def cmd_tally(args) -> int:
    records = judge.load_judgment_file(args.verdicts)
    labels = [
        judge.PairVerdict(
            per_criterion={c: lab[c] for c in judge.CRITERIA_PAIR},
            overall=lab["overall"],
            blind_map={"A": "A", "B": "B"},
        )
        for _, lab in records
    ]
    rows = judge.tally(labels)
    for crit, row in rows.items():
        print(f"  {crit:<30} {row.wins} wins / {row.losses} losses / {row.ties} ties")
    return EXIT_OK


def cmd_extract(args) -> int:
    config = RunConfig.from_file(args.config)
    tables = corpus.extract_chart_data(args.images, config.endpoint("generator"))
    print(json.dumps([{
        "title": t.title,
        "chart_kind": t.chart_kind,
        "columns": [{"name": c.name, "role": c.role, "unit": c.unit} for c in t.columns],
        "rows": [list(r) for r in t.rows],
        "visual_meta": {
            "series_colors": list(t.visual_meta.series_colors),
            "annotations": list(t.visual_meta.annotations),
        },
    } for t in tables], indent=2))
    return EXIT_OK


def cmd_generate(args) -> int:
    config = RunConfig.from_file(args.config)
    samples = _select_samples(corpus.load_manifest(config.paths.manifest), args)
    run_dir = create_run_dir(config.paths.output_root)
    writer = RunWriter(run_dir)
    print(f"run directory: {run_dir}")
    failures = 0
    for sample in samples:
        writer.append_event({"stage": "start", "sample_id": sample.id, "pipeline": config.pipeline})
        try:
            if config.pipeline == "single_shot":
                artifact, trace = agents.generate_single_shot(sample, config.endpoint("generator"))
            else:
                clients = agents.PipelineClients(
                    director=ChatClient(config.endpoint("director")),
                    plan_critic=ChatClient(config.endpoint("plan_critic")),
                    coder=ChatClient(config.endpoint("coder")),
                    video_critic=ChatClient(config.endpoint("video_critic")),
                )
                renderer = (
                    (lambda doc, d: render(doc, d, config.render))
                    if config.pipeline == "multi_agent"
                    else None
                )
                artifact, trace = agents.run_pipeline(
                    sample, clients, config.endpoint("coder").model_id,
                    renderer=renderer, mode=config.pipeline,
                    max_iterations=config.max_iterations,
                )
            frames = None
            if artifact.contract_report.passed:
                frames = render(artifact.doc, sample.duration_s, config.render)
            writer.write_sample(SampleRecord(sample.id, artifact=artifact, trace=trace, frames=frames))
            status = trace.final_status
            if status == "failed":
                failures += 1
            print(f"{sample.id}: {status}")
        except Exception as exc:
            failures += 1
            writer.append_event({"stage": "error", "sample_id": sample.id, "error": str(exc)})
            print(f"{sample.id}: failed ({exc})")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_judge_html(args) -> int:
    config = RunConfig.from_file(args.config)
    samples = {s.id: s for s in corpus.load_manifest(config.paths.manifest)}
    sample = samples.get(args.sample_id)
    if sample is None:
        raise ConfigError(f"unknown sample id {args.sample_id!r}")
    doc = Path(args.infile).read_text(encoding="utf-8")
    scores = judge.judge_html(sample, doc, config.endpoint("html_judge"))
    print(json.dumps({
        "sample_id": sample.id,
        **{c: getattr(scores, c) for c in judge.CRITERIA_HTML},
        "overall": scores.overall,
    }, indent=2))
    return EXIT_OK


def cmd_judge_pair(args) -> int:
    config = RunConfig.from_file(args.config)
    samples = {s.id: s for s in corpus.load_manifest(config.paths.manifest)}
    sample = samples.get(args.sample_id)
    if sample is None:
        raise ConfigError(f"unknown sample id {args.sample_id!r}")
    import base64

    video_a = base64.b64encode(Path(args.a).read_bytes()).decode("ascii")
    video_b = base64.b64encode(Path(args.b).read_bytes()).decode("ascii")
    reference = None
    if sample.reference_images:
        ref = Path(sample.reference_images[0])
        if ref.is_file():
            reference = base64.b64encode(ref.read_bytes()).decode("ascii")
    verdict = judge.judge_pair(
        sample, video_a, video_b, reference,
        config.endpoint("pair_judge"), rng_seed=config.blind_seed,
    )
    print(json.dumps({
        "sample_id": sample.id,
        **verdict.per_criterion,
        "overall": verdict.overall,
        "blind_map": verdict.blind_map,
        "rationale": verdict.rationale,
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reelforge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a document against the output contract")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="summarize a manifest of reel samples")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("render", help="render a validated document to frames")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--fps", type=int, default=10)
    p.add_argument("--out", default="render-out")
    p.add_argument("--mp4")
    p.add_argument("--browser")
    p.add_argument("--encoder")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("agree", help="agreement between judgment record files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--consensus", help="machine judgments; restrict to human-consensus samples")
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("tally", help="win/loss/tie tally of a verdict record file")
    p.add_argument("--verdicts", required=True)
    p.set_defaults(func=cmd_tally)

    p = sub.add_parser("extract", help="extract chart tables from screenshots")
    p.add_argument("--config", required=True)
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("generate", help="run a generation pipeline over manifest samples")
    p.add_argument("--config", required=True)
    p.add_argument("--sample", action="append")
    p.add_argument("--limit", type=int)
    p.add_argument("--shuffle-seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("judge-html", help="rubric-score one generated document")
    p.add_argument("--config", required=True)
    p.add_argument("--sample-id", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=cmd_judge_html)

    p = sub.add_parser("judge-pair", help="blind pairwise judgment of two videos")
    p.add_argument("--config", required=True)
    p.add_argument("--sample-id", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_judge_pair)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (corpus.ManifestError, judge.AlignmentError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
