"""Regenerate the deterministic test fixtures under tests/fixtures/.

The statistical fixtures are frozen encodings of the reference summary
statistics; every count below is chosen so the derived percentages land
exactly on the reference values. Run from the repository root:

    python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"

CHANNEL_COUNTS = [
    ("Vox", 112),
    ("The Wall Street Journal", 82),
    ("TLDR News Global", 41),
    ("Economics Explained", 30),
    ("Polymatter", 23),
    ("TLDR News", 19),
    ("The Guardian", 6),
    ("Kurzgesagt - In a Nutshell", 4),
    ("The Gravel Institute", 3),
    ("Our Changing Climate", 2),
    ("CBC News", 2),
    ("The Infographics Show", 2),
    ("Politizane", 1),
    ("TLDR News EU", 1),
]

# (category, count, first sample index); ranges tile all 328 samples so every
# sample carries at least one tag and no sample repeats a tag
CATEGORY_SPANS = [
    ("Emphasis", 297, 0),
    ("Suspense", 244, 84),
    ("Comparison", 105, 200),
    ("Ellipsis", 17, 10),
    ("Cohering", 4, 50),
    ("Focalization", 3, 300),
]

TOPICS = ["economy", "politics", "climate", "health", "technology", "society"]
KINDS = ["bar", "line", "pie", "area"]

INTENTS = [
    "Show how {topic} spending shifted between 2015 and 2024, ending on the sharp rise in the final year.",
    "Contrast the top five countries on {topic} output and reveal the surprising leader last.",
    "Walk through the decade-long decline in {topic} indicators before the 2023 rebound.",
    "Highlight the widening gap between the two largest {topic} blocs over time.",
]

TRANSCRIPTS = [
    "For years the numbers barely moved. Then, almost overnight, everything changed. "
    "By 2024 the figure had more than doubled, leaving analysts scrambling to explain why.",
    "Look at this line. Flat, flat, flat, and then this. A jump nobody predicted. "
    "And the countries at the bottom of the chart? They are catching up faster than anyone expected.",
    "Here is where it gets interesting. The blue bars are shrinking while the orange ones grow. "
    "Cross the two lines and you get the story of the last ten years in a single frame.",
]


def make_chart(kind: str, i: int) -> dict:
    rows = [[f"2{str(1900 + i % 100 + k)[-3:]}", (i * 7 + k * 13) % 90 + 5] for k in range(4)]
    return {
        "title": f"Series {i:03d}",
        "chart_kind": kind,
        "columns": [
            {"name": "year", "role": "temporal"},
            {"name": "value", "role": "quantitative", "unit": "%"},
        ],
        "rows": rows,
        "visual_meta": {"series_colors": ["#1f77b4", "#ff7f0e"], "annotations": []},
    }


def make_manifest() -> list[dict]:
    n = sum(c for _, c in CHANNEL_COUNTS)
    channels = [name for name, count in CHANNEL_COUNTS for _ in range(count)]
    tags: list[set[str]] = [set() for _ in range(n)]
    for cat, count, start in CATEGORY_SPANS:
        for j in range(count):
            tags[(start + j) % n].add(cat)
    assert all(tags), "every sample needs at least one category tag"
    assert sum(len(t) for t in tags) == sum(c for _, c, _ in CATEGORY_SPANS)

    samples = []
    for i in range(n):
        kinds = [KINDS[i % 4]] if i % 7 else [KINDS[i % 4], KINDS[(i + 1) % 4]]
        topic = TOPICS[i % len(TOPICS)]
        samples.append({
            "id": f"reel-{i:03d}",
            "channel": channels[i],
            "topic": topic,
            "chart_kinds": kinds,
            "animation_categories": sorted(tags[i]),
            "intent": INTENTS[i % len(INTENTS)].format(topic=topic),
            "transcript": TRANSCRIPTS[i % len(TRANSCRIPTS)],
            "duration_s": 5.5 + (i % 40),
            "charts": [make_chart(k, i) for k in kinds],
            "reference_images": [],
        })
    return samples


# agreement triples per criterion, pattern counts (a, b, c, d, e) where
#   a: h1 = h2 = m          b: h1 = h2 != m
#   c: h1 != h2, h1 = m     d: h1 != h2, h2 = m     e: h1 != h2, m matches neither
AGREEMENT_COUNTS = {
    "visualization_quality": (39, 34, 22, 23, 32),
    "subtitle_animation_coherence": (36, 37, 39, 33, 5),
    "style_consistency": (94, 6, 30, 19, 1),
    "overall": (76, 19, 27, 19, 9),
}
PATTERNS = {  # pattern -> (h1, h2, m)
    "a": ("A", "A", "A"),
    "b": ("A", "A", "B"),
    "c": ("A", "B", "A"),
    "d": ("A", "B", "B"),
    "e": ("A", "B", "tie"),
}


def make_agreement(rng: random.Random) -> dict[str, list[dict]]:
    n = 150
    columns = {}
    for crit, counts in AGREEMENT_COUNTS.items():
        seq = [p for p, c in zip("abcde", counts) for _ in range(c)]
        assert len(seq) == n
        rng.shuffle(seq)
        columns[crit] = seq

    files = {"human1": [], "human2": [], "machine": []}
    for i in range(n):
        recs = {who: {"sample_id": f"agree-{i:03d}", "judge_id": who} for who in files}
        for crit, seq in columns.items():
            h1, h2, m = PATTERNS[seq[i]]
            recs["human1"][crit] = h1
            recs["human2"][crit] = h2
            recs["machine"][crit] = m
        for who in files:
            files[who].append(recs[who])
    return files


VERDICT_COUNTS = {
    # (wins, losses, ties) per criterion plus explicit overall, n = 150
    "machine": {
        "visualization_quality": (103, 21, 26),
        "subtitle_animation_coherence": (70, 14, 66),
        "style_consistency": (148, 2, 0),
        "overall": (138, 12, 0),
    },
    "human_round": {
        "visualization_quality": (61, 51, 38),
        "subtitle_animation_coherence": (56, 36, 58),
        "style_consistency": (124, 19, 7),
        "overall": (101, 34, 15),
    },
    "no_critic": {
        "visualization_quality": (67, 51, 32),
        "subtitle_animation_coherence": (50, 44, 56),
        "style_consistency": (147, 0, 3),
        "overall": (117, 33, 0),
    },
}


def make_verdicts(name: str, counts: dict, rng: random.Random) -> list[dict]:
    n = 150
    columns = {}
    for crit, (w, l, t) in counts.items():
        assert w + l + t == n, (name, crit)
        seq = ["A"] * w + ["B"] * l + ["tie"] * t
        rng.shuffle(seq)
        columns[crit] = seq
    return [
        {"sample_id": f"pair-{i:03d}", "judge_id": name,
         **{crit: columns[crit][i] for crit in counts}}
        for i in range(n)
    ]


# per-criterion score sums over 100 documents: 466, 463, 333, 450
SCORE_MIX = {
    "narrative_quality": [(5, 66), (4, 34)],
    "informativeness": [(5, 63), (4, 37)],
    "subtitle_transcript_similarity": [(4, 33), (3, 67)],
    "code_correctness": [(5, 50), (4, 50)],
}


def make_scores(rng: random.Random) -> list[dict]:
    columns = {}
    for crit, mix in SCORE_MIX.items():
        seq = [v for v, c in mix for _ in range(c)]
        assert len(seq) == 100
        rng.shuffle(seq)
        columns[crit] = seq
    return [{crit: columns[crit][i] for crit in SCORE_MIX} for i in range(100)]


def make_violation_docs():
    """Each violation fixture is the conforming bar document with exactly one
    seeded defect, so it trips its own rule and nothing else."""
    base = (FIXTURES / "docs" / "conforming_bar.html").read_text(encoding="utf-8")

    def swap(old: str, new: str, count: int = 1) -> str:
        assert base.count(old) >= count, old
        return base.replace(old, new, count)

    docs = {
        "R1": swap("</body>", "</div>\n</body>"),
        "R2": swap('<svg id="chart" width="1280"', '<svg id="chart" width="1024"'),
        "R3": swap("window.__VIDEO_DURATION__ = 3;\n", ""),
        "R4": swap("function resetChart", "function initChart").replace(
            "resetChart();", "initChart();"
        ),
        "R5": swap("scheduleNow();\n</script>", "scheduleNow();\nscheduleNow();\n</script>"),
        "R6": swap(
            "  resetChart();\n",
            "  resetChart();\n  requestAnimationFrame(function () {});\n",
        ),
        "R7": swap("</body>", '<img src="https://example.com/logo.png" />\n</body>'),
        "R8": base.replace("setTimeout(", "setInterval("),
        "R9": swap(
            "</body>",
            '<script src="https://cdn.example.net/helper.js"></script>\n</body>',
        ),
        "R10": swap(
            'var bar = document.getElementById("bar");\n',
            'var bar = document.getElementById("bar");\nvar jitter = Math.random();\n',
        ),
    }
    for rule, text in docs.items():
        (FIXTURES / "docs" / f"violation_{rule.lower()}.html").write_text(text, encoding="utf-8")


def main():
    rng = random.Random(20240814)
    FIXTURES.mkdir(parents=True, exist_ok=True)

    make_violation_docs()
    manifest = make_manifest()
    (FIXTURES / "manifest.json").write_text(json.dumps(manifest, indent=1), encoding="utf-8")

    jdir = FIXTURES / "judgments"
    jdir.mkdir(exist_ok=True)
    for who, records in make_agreement(rng).items():
        (jdir / f"{who}.jsonl").write_text(
            "".join(json.dumps(r) + "\n" for r in records), encoding="utf-8"
        )

    vdir = FIXTURES / "verdicts"
    vdir.mkdir(exist_ok=True)
    for name, counts in VERDICT_COUNTS.items():
        records = make_verdicts(name, counts, rng)
        (vdir / f"{name}.jsonl").write_text(
            "".join(json.dumps(r) + "\n" for r in records), encoding="utf-8"
        )

    sdir = FIXTURES / "scores"
    sdir.mkdir(exist_ok=True)
    (sdir / "html_scores.json").write_text(
        json.dumps(make_scores(rng), indent=1), encoding="utf-8"
    )
    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
