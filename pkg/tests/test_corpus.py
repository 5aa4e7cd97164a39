"""Manifest schema, round-trip serialization, stats, and chart extraction."""

import json

import httpx
import pytest
from hypothesis import given, strategies as st

from reelforge import corpus
from reelforge.endpoints import ChatClient, EndpointConfig


def sample_obj(**overrides) -> dict:
    obj = {
        "id": "s-1",
        "channel": "Vox",
        "topic": "economy",
        "chart_kinds": ["bar"],
        "animation_categories": ["Emphasis"],
        "intent": "Show the rise.",
        "transcript": "It rose.",
        "duration_s": 12.0,
        "charts": [
            {
                "title": "t",
                "chart_kind": "bar",
                "columns": [
                    {"name": "year", "role": "temporal"},
                    {"name": "value", "role": "quantitative"},
                ],
                "rows": [["2020", 1], ["2021", 2]],
            }
        ],
    }
    obj.update(overrides)
    return obj


def write_manifest(tmp_path, objs):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(objs), encoding="utf-8")
    return path


class TestManifest:
    def test_load_preserves_order_and_ids(self, tmp_path):
        objs = [sample_obj(id=f"s-{i}") for i in range(5)]
        samples = corpus.load_manifest(write_manifest(tmp_path, objs))
        assert [s.id for s in samples] == [f"s-{i}" for i in range(5)]

    def test_duplicate_id_rejected(self, tmp_path):
        path = write_manifest(tmp_path, [sample_obj(), sample_obj()])
        with pytest.raises(corpus.ManifestError, match="duplicate"):
            corpus.load_manifest(path)

    def test_error_names_sample_and_field(self, tmp_path):
        path = write_manifest(tmp_path, [sample_obj(id="bad-dur", duration_s=-3)])
        with pytest.raises(corpus.ManifestError) as exc:
            corpus.load_manifest(path)
        assert exc.value.sample_id == "bad-dur"
        assert exc.value.field == "duration_s"

    @pytest.mark.parametrize(
        "overrides,field",
        [
            ({"animation_categories": []}, "animation_categories"),
            ({"animation_categories": ["Sparkle"]}, "animation_categories"),
            ({"chart_kinds": ["histogram"]}, "chart_kinds"),
            ({"intent": "   "}, "intent"),
            ({"charts": []}, "charts"),
        ],
    )
    def test_schema_violations(self, tmp_path, overrides, field):
        path = write_manifest(tmp_path, [sample_obj(**overrides)])
        with pytest.raises(corpus.ManifestError) as exc:
            corpus.load_manifest(path)
        assert exc.value.field == field

    def test_ragged_chart_rows_rejected(self, tmp_path):
        obj = sample_obj()
        obj["charts"][0]["rows"] = [["2020", 1], ["2021"]]
        with pytest.raises(corpus.ManifestError, match="row 1"):
            corpus.load_manifest(write_manifest(tmp_path, [obj]))

    def test_bad_series_color_rejected(self, tmp_path):
        obj = sample_obj()
        obj["charts"][0]["visual_meta"] = {"series_colors": ["red"]}
        with pytest.raises(corpus.ManifestError, match="series color"):
            corpus.load_manifest(write_manifest(tmp_path, [obj]))

    def test_not_an_array_rejected(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text('{"id": "x"}', encoding="utf-8")
        with pytest.raises(corpus.ManifestError, match="array"):
            corpus.load_manifest(path)

    def test_round_trip(self, tmp_path, manifest_samples):
        text = corpus.serialize_samples(manifest_samples)
        path = tmp_path / "round.json"
        path.write_text(text, encoding="utf-8")
        again = corpus.load_manifest(path)
        assert again == manifest_samples

    def test_effective_chart_kind(self, tmp_path):
        single = sample_obj(id="a", chart_kinds=["line"])
        mixed = sample_obj(id="b", chart_kinds=["bar", "pie"])
        samples = corpus.load_manifest(write_manifest(tmp_path, [single, mixed]))
        assert samples[0].effective_chart_kind == "line"
        assert samples[1].effective_chart_kind == "multiple"


class TestStats:
    def test_fixture_manifest_headline_numbers(self, manifest_samples):
        stats = corpus.compute_stats(manifest_samples)
        assert stats.sample_count == 328
        assert stats.channel_counts["Vox"] == 112
        assert stats.category_tag_total == 670
        assert stats.category_counts["Emphasis"] == 297
        assert abs(stats.channel_pct["Vox"] - 34.1) < 0.05
        assert abs(stats.category_pct["Emphasis"] - 44.3) < 0.05

    def test_category_percentages_sum_to_100(self, manifest_samples):
        stats = corpus.compute_stats(manifest_samples)
        assert abs(sum(stats.category_pct.values()) - 100.0) < 1e-9
        assert abs(sum(stats.channel_pct.values()) - 100.0) < 1e-9

    def test_duration_histogram_bins(self, tmp_path):
        objs = [
            sample_obj(id=f"d-{i}", duration_s=d)
            for i, d in enumerate([2.0, 4.9, 5.0, 12.0, 14.9])
        ]
        stats = corpus.compute_stats(corpus.load_manifest(write_manifest(tmp_path, objs)))
        assert stats.duration_hist == {0.0: 2, 5.0: 1, 10.0: 2}

    def test_token_counts_are_whitespace_words(self, tmp_path):
        objs = [sample_obj(intent="three word intent", transcript="a  b\nc")]
        stats = corpus.compute_stats(corpus.load_manifest(write_manifest(tmp_path, objs)))
        assert stats.intent_tokens == (3,)
        assert stats.transcript_tokens == (3,)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            corpus.compute_stats([])

    @given(st.lists(st.sampled_from(sorted(corpus.ANIMATION_CATEGORIES)), min_size=1, max_size=6, unique=True))
    def test_tag_total_matches_sum_of_counts(self, tags):
        sample = corpus._sample_from_obj(sample_obj(animation_categories=tags))
        stats = corpus.compute_stats([sample])
        assert stats.category_tag_total == len(tags)
        assert sum(stats.category_counts.values()) == len(tags)


def mock_endpoint(handler) -> tuple[EndpointConfig, ChatClient]:
    config = EndpointConfig(base_url="https://mock.test/v1", model_id="m", supports_images=True)
    client = ChatClient(config, transport=httpx.MockTransport(handler), sleep=lambda _s: None)
    return config, client


def reply(text: str) -> httpx.Response:
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


TABLE_JSON = json.dumps([
    {
        "title": "Arms exports",
        "chart_kind": "bar",
        "columns": [
            {"name": "year", "role": "temporal"},
            {"name": "share", "role": "quantitative", "unit": "%"},
        ],
        "rows": [["2020", 4.8], ["2024", 5.9]],
        "visual_meta": {"series_colors": ["#1f77b4"], "annotations": ["record high"]},
    }
])


class TestExtraction:
    def make_image(self, tmp_path, name="shot.png"):
        path = tmp_path / name
        path.write_bytes(b"\x89PNG fake")
        return path

    def test_single_request_carries_all_images(self, tmp_path, monkeypatch):
        monkeypatch.setenv("REELFORGE_API_KEY", "k")
        seen = []

        def handler(request):
            seen.append(json.loads(request.content))
            return reply(TABLE_JSON)

        config, client = mock_endpoint(handler)
        images = [self.make_image(tmp_path, f"s{i}.png") for i in range(3)]
        tables = corpus.extract_chart_data(images, config, client=client)
        assert len(seen) == 1
        content = seen[0]["messages"][0]["content"]
        assert sum(1 for part in content if part.get("type") == "image_url") == 3
        assert tables[0].chart_kind == "bar"
        assert tables[0].visual_meta.series_colors == ("#1f77b4",)

    def test_one_retry_then_error(self, tmp_path, monkeypatch):
        monkeypatch.setenv("REELFORGE_API_KEY", "k")
        calls = []

        def handler(request):
            calls.append(1)
            return reply("not json at all")

        config, client = mock_endpoint(handler)
        with pytest.raises(corpus.ExtractionError):
            corpus.extract_chart_data([self.make_image(tmp_path)], config, client=client)
        assert len(calls) == 2

    def test_retry_succeeds_second_time(self, tmp_path, monkeypatch):
        monkeypatch.setenv("REELFORGE_API_KEY", "k")
        replies = iter(["garbage", f"```json\n{TABLE_JSON}\n```"])

        def handler(request):
            return reply(next(replies))

        config, client = mock_endpoint(handler)
        tables = corpus.extract_chart_data([self.make_image(tmp_path)], config, client=client)
        assert tables[0].title == "Arms exports"

    def test_image_free_endpoint_rejected(self, tmp_path):
        config = EndpointConfig(base_url="https://mock.test/v1", model_id="m", supports_images=False)
        with pytest.raises(ValueError, match="image"):
            corpus.extract_chart_data([self.make_image(tmp_path)], config)

    def test_no_images_rejected(self):
        config = EndpointConfig(base_url="https://mock.test/v1", model_id="m", supports_images=True)
        with pytest.raises(ValueError):
            corpus.extract_chart_data([], config)
