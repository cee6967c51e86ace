from __future__ import annotations

import json
from pathlib import Path

import pytest

from perioseed.corpus import save_gold, save_notes
from perioseed.synthetic import make_synthetic_corpus

TESTS_DIR = Path(__file__).parent
VECTORS_PATH = TESTS_DIR / "vectors" / "normalization_vectors.json"
GOLDEN_DIR = TESTS_DIR / "golden"

# One fixed synthetic corpus reused across pipeline and acceptance tests.
CORPUS_NOTES = 200
CORPUS_SEED = 11


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory) -> dict:
    root = tmp_path_factory.mktemp("corpus")
    notes, gold = make_synthetic_corpus(CORPUS_NOTES, CORPUS_SEED)
    notes_path = root / "notes.jsonl"
    gold_path = root / "gold.jsonl"
    save_notes(notes, notes_path)
    save_gold(gold, gold_path)
    return {
        "notes": notes,
        "gold": gold,
        "notes_path": notes_path,
        "gold_path": gold_path,
    }


@pytest.fixture(scope="session")
def normalization_vectors() -> list[dict]:
    with open(VECTORS_PATH, encoding="utf-8") as fh:
        return json.load(fh)["cases"]
