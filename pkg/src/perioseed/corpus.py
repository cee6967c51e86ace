"""Clinical note ingestion, sentence segmentation, and gold-standard loading.

File formats:
  notes: JSONL, one object per line: {"id": str, "text": str}
  gold:  JSONL, one object per line:
         {"id": str, "stage": str|null, "grade": str|null, "extent": str|null}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .vocab import EXTENTS, GRADES, STAGES


class CorpusError(ValueError):
    """Malformed notes or gold files."""


@dataclass(frozen=True)
class ClinicalNote:
    id: str
    text: str


@dataclass(frozen=True)
class Sentence:
    note_id: str
    index: int
    text: str


@dataclass(frozen=True)
class GoldAnnotation:
    note_id: str
    stage: Optional[str] = None
    grade: Optional[str] = None
    extent: Optional[str] = None


def _read_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"line {lineno}: expected a JSON object")
            yield lineno, obj


def load_notes(path: str | Path) -> list[ClinicalNote]:
    """Load notes in file order, rejecting duplicate ids and malformed lines.

    Carriage returns are stripped at ingestion ("\\r\\n" becomes one newline)
    so segmentation sees a single newline convention.
    """
    notes: list[ClinicalNote] = []
    seen: set[str] = set()
    for lineno, obj in _read_jsonl(path):
        if not isinstance(obj.get("id"), str) or not obj["id"]:
            raise CorpusError(f"line {lineno}: missing or empty \"id\"")
        if not isinstance(obj.get("text"), str):
            raise CorpusError(f"line {lineno}: missing \"text\"")
        note_id = obj["id"]
        if note_id in seen:
            raise CorpusError(f"duplicate note id {note_id!r}")
        seen.add(note_id)
        notes.append(ClinicalNote(id=note_id, text=obj["text"].replace("\r", "")))
    return notes


def save_notes(notes: Iterable[ClinicalNote], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for note in notes:
            fh.write(json.dumps({"id": note.id, "text": note.text}, ensure_ascii=False) + "\n")


def segment_sentences(note: ClinicalNote) -> list[Sentence]:
    """Split a note on newlines into ordered sentences.

    Empty segments (consecutive newlines) are kept so that joining the
    sentence texts with "\\n" reproduces note.text exactly; downstream
    candidate extraction skips them.
    """
    return [
        Sentence(note_id=note.id, index=i, text=segment)
        for i, segment in enumerate(note.text.split("\n"))
    ]


_GOLD_VOCAB = {"stage": STAGES, "grade": GRADES, "extent": EXTENTS}


def load_gold(path: str | Path, known_ids: Optional[set[str]] = None) -> list[GoldAnnotation]:
    """Load gold annotations, validating values against the closed vocabularies.

    When *known_ids* is given, each annotation must reference one of them.
    """
    gold: list[GoldAnnotation] = []
    seen: set[str] = set()
    for lineno, obj in _read_jsonl(path):
        if not isinstance(obj.get("id"), str) or not obj["id"]:
            raise CorpusError(f"line {lineno}: missing or empty \"id\"")
        note_id = obj["id"]
        if note_id in seen:
            raise CorpusError(f"duplicate gold id {note_id!r}")
        seen.add(note_id)
        values: dict[str, Optional[str]] = {}
        for field, vocabulary in _GOLD_VOCAB.items():
            value = obj.get(field)
            if value is None:
                values[field] = None
                continue
            if value not in vocabulary:
                raise CorpusError(
                    f"id {note_id!r}: field {field!r} has value {value!r}, "
                    f"expected one of {list(vocabulary)} or null"
                )
            values[field] = value
        if known_ids is not None and note_id not in known_ids:
            raise CorpusError(f"id {note_id!r}: no such note in the corpus")
        gold.append(GoldAnnotation(note_id=note_id, **values))
    return gold


def save_gold(annotations: Iterable[GoldAnnotation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ann in annotations:
            row = {"id": ann.note_id, "stage": ann.stage, "grade": ann.grade, "extent": ann.extent}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
