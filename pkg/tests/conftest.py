from __future__ import annotations

from importlib import resources
from pathlib import Path

import pytest

from varybalance.cache import DiskCache

GOLDEN = Path(__file__).parent / "golden"
DATA = Path(__file__).parent / "data"


@pytest.fixture
def fixture_corpus_path() -> Path:
    return Path(str(resources.files("varybalance.data").joinpath("fixture_corpus.jsonl")))


@pytest.fixture
def cache(tmp_path) -> DiskCache:
    return DiskCache(tmp_path / "cache")
