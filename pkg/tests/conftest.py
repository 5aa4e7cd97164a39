import json
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
DOCS = FIXTURES / "docs"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def docs_dir() -> Path:
    return DOCS


@pytest.fixture(scope="session")
def bar_doc() -> str:
    return (DOCS / "conforming_bar.html").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def manifest_samples():
    from reelforge import corpus

    return corpus.load_manifest(FIXTURES / "manifest.json")


@pytest.fixture(scope="session")
def tiny_sample():
    """One small valid sample for agent and judge tests."""
    from reelforge import corpus

    return corpus.load_manifest(FIXTURES / "manifest.json")[0]


def load_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
