"""Rubric scoring, blind pairwise protocol, tallies, and agreement analytics."""

import itertools
import json

import httpx
import pytest
from hypothesis import given, strategies as st

from reelforge import judge
from reelforge.endpoints import ChatClient, EndpointConfig

ENDPOINT = EndpointConfig(base_url="https://mock.test/v1", model_id="judge", supports_images=True)


def scripted_client(replies):
    replies = iter(replies)

    def handler(request):
        return httpx.Response(
            200, json={"choices": [{"message": {"content": next(replies)}}]}
        )

    return ChatClient(ENDPOINT, transport=httpx.MockTransport(handler), sleep=lambda _s: None)


SCORES_JSON = json.dumps({
    "narrative_quality": 5,
    "informativeness": 4,
    "subtitle_transcript_similarity": 3,
    "code_correctness": 4,
})


class TestHtmlScores:
    def test_overall_is_mean(self):
        s = judge.HtmlScores(5, 4, 3, 4)
        assert s.overall == 4.0

    @pytest.mark.parametrize("bad", [-1, 6, "5"])
    def test_out_of_range_rejected(self, bad):
        with pytest.raises(judge.JudgeParseError):
            judge.HtmlScores(bad, 4, 3, 4)

    def test_judge_html_parses_reply(self, tiny_sample):
        scores = judge.judge_html(tiny_sample, "<!DOCTYPE html>", ENDPOINT,
                                  client=scripted_client([SCORES_JSON]))
        assert scores.narrative_quality == 5
        assert scores.overall == 4.0

    def test_one_reparse_retry(self, tiny_sample):
        scores = judge.judge_html(tiny_sample, "<!DOCTYPE html>", ENDPOINT,
                                  client=scripted_client(["mumble", SCORES_JSON]))
        assert scores.code_correctness == 4

    def test_unparseable_twice_raises(self, tiny_sample):
        with pytest.raises(judge.JudgeParseError):
            judge.judge_html(tiny_sample, "<!DOCTYPE html>", ENDPOINT,
                             client=scripted_client(["a", "b"]))

    def test_range_error_not_retried(self, tiny_sample):
        bad = SCORES_JSON.replace('"narrative_quality": 5', '"narrative_quality": 9')
        with pytest.raises(judge.JudgeParseError, match="outside 0-5"):
            judge.judge_html(tiny_sample, "<!DOCTYPE html>", ENDPOINT,
                             client=scripted_client([bad, bad]))

    def test_empty_doc_rejected(self, tiny_sample):
        with pytest.raises(ValueError):
            judge.judge_html(tiny_sample, "  ", ENDPOINT)

    def test_fenced_json_accepted(self, tiny_sample):
        scores = judge.judge_html(tiny_sample, "<!DOCTYPE html>", ENDPOINT,
                                  client=scripted_client([f"```json\n{SCORES_JSON}\n```"]))
        assert scores.informativeness == 4


VERDICT_JSON = json.dumps({
    "visualization_quality": "A",
    "subtitle_animation_coherence": "B",
    "style_consistency": "A",
    "overall": "A",
    "rationale": "left reel is tighter",
})


def seed_with_swap(swapped: bool) -> int:
    import random

    seed = 0
    while (random.Random(seed).random() < 0.5) != swapped:
        seed += 1
    return seed


class TestPairwise:
    def test_unswapped_labels_pass_through(self, tiny_sample):
        seed = seed_with_swap(False)
        v = judge.judge_pair(tiny_sample, "vidA", "vidB", None, ENDPOINT, rng_seed=seed,
                             client=scripted_client([VERDICT_JSON]))
        assert v.blind_map == {"A": "A", "B": "B"}
        assert v.per_criterion["visualization_quality"] == "A"
        assert v.overall == "A"

    def test_swapped_labels_mapped_back(self, tiny_sample):
        seed = seed_with_swap(True)
        v = judge.judge_pair(tiny_sample, "vidA", "vidB", None, ENDPOINT, rng_seed=seed,
                             client=scripted_client([VERDICT_JSON]))
        assert v.blind_map == {"A": "B", "B": "A"}
        # the judge preferred presented slot A, which is the true B
        assert v.per_criterion["visualization_quality"] == "B"
        assert v.overall == "B"
        assert v.per_criterion["subtitle_animation_coherence"] == "A"

    def test_swap_reverses_video_order(self, tiny_sample):
        for swapped in (False, True):
            seen = {}

            def handler(request):
                seen["body"] = json.loads(request.content)
                return httpx.Response(
                    200, json={"choices": [{"message": {"content": VERDICT_JSON}}]}
                )

            client = ChatClient(ENDPOINT, transport=httpx.MockTransport(handler),
                                sleep=lambda _s: None)
            judge.judge_pair(tiny_sample, "AAAA", "BBBB", None, ENDPOINT,
                             rng_seed=seed_with_swap(swapped), client=client)
            parts = seen["body"]["messages"][0]["content"]
            urls = [p["image_url"]["url"] for p in parts if p.get("type") == "image_url"]
            first = urls[0].split(",", 1)[1]
            assert first == ("BBBB" if swapped else "AAAA")

    def test_tie_labels_survive_swap(self, tiny_sample):
        all_tie = json.dumps({c: "tie" for c in judge.CRITERIA_PAIR} | {"overall": "tie"})
        v = judge.judge_pair(tiny_sample, "a", "b", None, ENDPOINT,
                             rng_seed=seed_with_swap(True),
                             client=scripted_client([all_tie]))
        assert v.overall == "tie"
        assert set(v.per_criterion.values()) == {"tie"}

    def test_missing_overall_derived(self, tiny_sample):
        partial = json.dumps({
            "visualization_quality": "A",
            "subtitle_animation_coherence": "A",
            "style_consistency": "B",
        })
        v = judge.judge_pair(tiny_sample, "a", "b", None, ENDPOINT,
                             rng_seed=seed_with_swap(False),
                             client=scripted_client([partial]))
        assert v.overall == "A"

    def test_same_seed_same_blinding(self, tiny_sample):
        v1 = judge.judge_pair(tiny_sample, "a", "b", None, ENDPOINT, rng_seed=7,
                              client=scripted_client([VERDICT_JSON]))
        v2 = judge.judge_pair(tiny_sample, "a", "b", None, ENDPOINT, rng_seed=7,
                              client=scripted_client([VERDICT_JSON]))
        assert v1.blind_map == v2.blind_map

    def test_bad_label_retries_then_raises(self, tiny_sample):
        bad = VERDICT_JSON.replace('"A"', '"Z"')
        with pytest.raises(judge.JudgeParseError):
            judge.judge_pair(tiny_sample, "a", "b", None, ENDPOINT, rng_seed=0,
                             client=scripted_client([bad, bad]))


class TestDeriveOverall:
    def test_exhaustive_majority_rule(self):
        for triple in itertools.product(judge.LABELS, repeat=3):
            per = dict(zip(judge.CRITERIA_PAIR, triple))
            result = judge.derive_overall(per)
            wins_a = triple.count("A")
            wins_b = triple.count("B")
            if wins_a > wins_b:
                assert result == "A", triple
            elif wins_b > wins_a:
                assert result == "B", triple
            else:
                assert result == "tie", triple

    @given(st.lists(st.sampled_from(judge.LABELS), min_size=3, max_size=3))
    def test_swap_symmetry(self, triple):
        per = dict(zip(judge.CRITERIA_PAIR, triple))
        flip = {"A": "B", "B": "A", "tie": "tie"}
        swapped = {k: flip[v] for k, v in per.items()}
        assert judge.derive_overall(swapped) == flip[judge.derive_overall(per)]

    def test_all_tie(self):
        assert judge.derive_overall({c: "tie" for c in judge.CRITERIA_PAIR}) == "tie"


def verdicts_from_file(path):
    records = judge.load_judgment_file(path)
    return [
        judge.PairVerdict(
            per_criterion={c: labels[c] for c in judge.CRITERIA_PAIR},
            overall=labels["overall"],
            blind_map={"A": "A", "B": "B"},
        )
        for _, labels in records
    ]


class TestTallyAndAgreement:
    def test_tally_counts(self, fixtures_dir):
        rows = judge.tally(verdicts_from_file(fixtures_dir / "verdicts" / "machine.jsonl"))
        assert (rows["overall"].wins, rows["overall"].losses, rows["overall"].ties) == (138, 12, 0)
        sc = rows["style_consistency"]
        assert (sc.wins, sc.losses, sc.ties) == (148, 2, 0)

    def test_tally_empty_rejected(self):
        with pytest.raises(ValueError):
            judge.tally([])

    def test_agreement_alignment_checked(self):
        a = [("s1", {"overall": "A"})]
        b = [("s2", {"overall": "A"})]
        with pytest.raises(judge.AlignmentError):
            judge.agreement(a, b)
        with pytest.raises(judge.AlignmentError):
            judge.agreement(a, [])

    def test_agreement_simple_counts(self):
        labels = lambda o: {c: o for c in judge.CRITERIA_PAIR} | {"overall": o}
        a = [("s1", labels("A")), ("s2", labels("B")), ("s3", labels("tie"))]
        b = [("s1", labels("A")), ("s2", labels("A")), ("s3", labels("tie"))]
        rep = judge.agreement(a, b)
        assert rep.overall.matches == 2
        assert rep.overall.n == 3
        assert abs(rep.overall.pct - 66.6667) < 0.001

    def test_consensus_restricts_to_human_agreement(self):
        labels = lambda o: {c: o for c in judge.CRITERIA_PAIR} | {"overall": o}
        h1 = [("s1", labels("A")), ("s2", labels("A")), ("s3", labels("B"))]
        h2 = [("s1", labels("A")), ("s2", labels("B")), ("s3", labels("B"))]
        m = [("s1", labels("A")), ("s2", labels("A")), ("s3", labels("tie"))]
        rep = judge.consensus_agreement(h1, h2, m)
        assert rep.overall.n == 2  # s1 and s3 only
        assert rep.overall.matches == 1

    def test_empty_consensus_set_has_no_pct(self):
        labels = lambda o: {c: o for c in judge.CRITERIA_PAIR} | {"overall": o}
        rep = judge.consensus_agreement(
            [("s1", labels("A"))], [("s1", labels("B"))], [("s1", labels("A"))]
        )
        assert rep.overall.n == 0
        assert rep.overall.pct is None

    def test_load_judgment_file_rejects_bad_label(self, tmp_path):
        path = tmp_path / "j.jsonl"
        rec = {"sample_id": "s1", "overall": "X"} | {c: "A" for c in judge.CRITERIA_PAIR}
        path.write_text(json.dumps(rec) + "\n", encoding="utf-8")
        with pytest.raises(judge.AlignmentError, match="bad label"):
            judge.load_judgment_file(path)

    def test_load_judgment_file_rejects_missing_field(self, tmp_path):
        path = tmp_path / "j.jsonl"
        path.write_text(json.dumps({"sample_id": "s1"}) + "\n", encoding="utf-8")
        with pytest.raises(judge.AlignmentError, match="missing field"):
            judge.load_judgment_file(path)


class TestAggregateScores:
    def test_fixture_means(self, fixtures_dir):
        raw = json.loads((fixtures_dir / "scores" / "html_scores.json").read_text())
        scores = [judge.HtmlScores(**obj) for obj in raw]
        means = judge.aggregate_scores({"flagship": scores})["flagship"]
        assert means.narrative_quality == 4.66
        assert means.informativeness == 4.63
        assert means.subtitle_transcript_similarity == 3.33
        assert means.code_correctness == 4.50
        assert means.overall == 4.28

    def test_empty_group_rejected(self):
        with pytest.raises(ValueError):
            judge.aggregate_scores({"m": []})
