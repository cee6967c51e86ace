"""Per-note prediction in the evaluator's JSONL schema.

Each note is split on newlines; every sentence is tagged, recognized spans
become raw field values (the highest-confidence span per label per
sentence), values are normalized into the canonical vocabularies, and the
note's most severe sentence diagnosis is emitted:

    {"id": ..., "stage": ..., "grade": ..., "extent": ...}
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import torch

from .data import TAGS, Token, decode_spans, token_ids, tokenize
from .model import load_model
from .normalization import most_severe, normalize_value, severity_key


def _sentence_diagnosis(model, vocab, max_len: int, text: str) -> Optional[dict]:
    tokens = tokenize(text)[:max_len]
    if not tokens:
        return None
    ids = torch.tensor([token_ids(tokens, vocab)])
    pad = torch.zeros(1, len(tokens), dtype=torch.bool)
    with torch.no_grad():
        probabilities = model(ids, pad).softmax(-1)[0]
    tag_ids = probabilities.argmax(-1).tolist()
    spans = decode_spans(tokens, tag_ids)
    if not spans:
        return None

    token_by_offset = {(t.start, t.end): i for i, t in enumerate(tokens)}
    best: dict[str, tuple[float, str]] = {}
    for start, end, label in spans:
        covered = [i for i, t in enumerate(tokens) if t.start >= start and t.end <= end]
        confidence = float(
            sum(probabilities[i, tag_ids[i]].item() for i in covered) / max(len(covered), 1)
        )
        value = text[start:end]
        if label not in best or confidence > best[label][0]:
            best[label] = (confidence, value)

    raw = {label.lower(): value for label, (_, value) in best.items()}
    return {
        "stage": normalize_value("stage", raw["stage"]) if "stage" in raw else None,
        "grade": normalize_value("grade", raw["grade"]) if "grade" in raw else None,
        "extent": normalize_value("extent", raw["extent"]) if "extent" in raw else None,
    }


def predict(model_dir: str | Path, notes_path: str | Path, out_path: str | Path) -> int:
    """Write one prediction line per note; returns the number of notes."""
    model, vocab = load_model(model_dir)
    max_len = model.spec.max_len
    count = 0
    with open(notes_path, encoding="utf-8") as notes, \
            open(out_path, "w", encoding="utf-8") as out:
        for lineno, line in enumerate(notes, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if not isinstance(obj.get("id"), str) or not isinstance(obj.get("text"), str):
                raise ValueError(f"notes line {lineno}: expected \"id\" and \"text\"")
            diagnoses = []
            for sentence in obj["text"].split("\n"):
                diagnosis = _sentence_diagnosis(model, vocab, max_len, sentence)
                if diagnosis and severity_key(
                    diagnosis["stage"], diagnosis["grade"], diagnosis["extent"]
                ) > (0, 0, 0):
                    diagnoses.append(diagnosis)
            severe = most_severe(diagnoses)
            out.write(json.dumps({"id": obj["id"], **severe}, ensure_ascii=False) + "\n")
            count += 1
    return count
