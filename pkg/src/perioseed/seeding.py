"""Label normalization, severity selection, span location, and dataset splitting.

Normalization repairs what generation tends to get slightly wrong:
stray punctuation around values, arabic vs roman stage numerals, case,
and small typos in the extent words. Anything that cannot be mapped into
the closed vocabularies becomes absent rather than an error.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .corpus import Sentence
from .prompting import FilteredDiagnosis, RawDiagnosis
from .text import find_token_runs, token_texts, tokenize
from .vocab import EXTENTS, GRADES, STAGE_MAP, STAGES

# Trimmed from both ends of a generated value before mapping.
_STRIP_CHARS = " \t\r\n.,;:!?'\""

SPAN_LABELS = {"stage": "STAGE", "grade": "GRADE", "extent": "EXTENT"}


@dataclass(frozen=True)
class CanonicalDiagnosis:
    stage: Optional[str] = None  # I, II, III, IV
    grade: Optional[str] = None  # A, B, C
    extent: Optional[str] = None  # localized, generalized

    def __post_init__(self) -> None:
        if self.stage is not None and self.stage not in STAGES:
            raise ValueError(f"stage {self.stage!r} not in {STAGES}")
        if self.grade is not None and self.grade not in GRADES:
            raise ValueError(f"grade {self.grade!r} not in {GRADES}")
        if self.extent is not None and self.extent not in EXTENTS:
            raise ValueError(f"extent {self.extent!r} not in {EXTENTS}")

    def get(self, category: str) -> Optional[str]:
        return getattr(self, category)

    def is_empty(self) -> bool:
        return self.stage is None and self.grade is None and self.extent is None


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int  # exclusive
    label: str  # STAGE, GRADE, EXTENT


@dataclass(frozen=True)
class SeedExample:
    text: str
    spans: tuple[EntitySpan, ...]
    note_id: str = field(default="", compare=False)
    index: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SeedSplit:
    train: tuple[SeedExample, ...]
    validation: tuple[SeedExample, ...]
    test: tuple[SeedExample, ...]
    rng_seed: int


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance, two-row dynamic programming."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def normalize_stage(value: str) -> Optional[str]:
    return STAGE_MAP.get(value.strip(_STRIP_CHARS).lower())


def normalize_grade(value: str) -> Optional[str]:
    cleaned = value.strip(_STRIP_CHARS).upper()
    return cleaned if cleaned in GRADES else None


def normalize_extent(value: str) -> Optional[str]:
    cleaned = value.strip(_STRIP_CHARS).lower()
    if cleaned in EXTENTS:
        return cleaned
    distances = {word: edit_distance(cleaned, word) for word in EXTENTS}
    best = min(distances.values())
    if best > 2:
        return None
    nearest = [word for word, d in distances.items() if d == best]
    return nearest[0] if len(nearest) == 1 else None


_FIELD_NORMALIZERS = {"stage": normalize_stage, "grade": normalize_grade, "extent": normalize_extent}


def normalize_value(category: str, value: str) -> Optional[str]:
    return _FIELD_NORMALIZERS[category](value)


def normalize_raw(raw: RawDiagnosis) -> CanonicalDiagnosis:
    return CanonicalDiagnosis(
        stage=normalize_stage(raw.stage) if raw.stage is not None else None,
        grade=normalize_grade(raw.grade) if raw.grade is not None else None,
        extent=normalize_extent(raw.extent) if raw.extent is not None else None,
    )


def normalize(filtered: FilteredDiagnosis) -> CanonicalDiagnosis:
    """Map a presence-verified diagnosis into the canonical vocabularies."""
    return normalize_raw(filtered.raw)


_STAGE_RANK = {None: 0, "I": 1, "II": 2, "III": 3, "IV": 4}
_EXTENT_RANK = {None: 0, "localized": 1, "generalized": 2}
_GRADE_RANK = {None: 0, "A": 1, "B": 2, "C": 3}


def severity_key(d: CanonicalDiagnosis) -> tuple[int, int, int]:
    """Lexicographic severity: stage first, then extent, then grade.

    Absent ranks below every stated value in each position.
    """
    return (_STAGE_RANK[d.stage], _EXTENT_RANK[d.extent], _GRADE_RANK[d.grade])


def select_most_severe(diagnoses: Sequence[CanonicalDiagnosis]) -> CanonicalDiagnosis:
    """The maximal-severity diagnosis; ties go to the earliest element."""
    if not diagnoses:
        raise ValueError("cannot select from an empty diagnosis list")
    return max(diagnoses, key=severity_key)  # max keeps the first maximum


def locate_spans(target: Sentence, filtered: FilteredDiagnosis) -> SeedExample:
    """Character spans for each retained field value in the target sentence.

    Stage and grade prefer the first occurrence immediately after their
    keyword token ("stage"/"grade"); otherwise, and for extent, the first
    occurrence wins. Occurrences overlapping an already-placed span are
    skipped so spans never overlap.
    """
    tokens = tokenize(target.text)
    spans: list[EntitySpan] = []
    for category, keyword in (("stage", "stage"), ("grade", "grade"), ("extent", None)):
        value = filtered.raw.get(category)
        if value is None:
            continue
        needle = token_texts(value)
        hits = find_token_runs(tokens, needle)
        if not hits:
            raise RuntimeError(
                f"retained {category} value {value!r} not found in target "
                f"{target.text!r}; verify_presence must run first"
            )
        ordered = hits
        if keyword is not None:
            anchored = [i for i in hits if i > 0 and tokens[i - 1].text == keyword]
            ordered = anchored + [i for i in hits if i not in anchored]
        for i in ordered:
            candidate = EntitySpan(
                start=tokens[i].start,
                end=tokens[i + len(needle) - 1].end,
                label=SPAN_LABELS[category],
            )
            if not any(candidate.start < s.end and s.start < candidate.end for s in spans):
                spans.append(candidate)
                break
    spans.sort(key=lambda s: s.start)
    return SeedExample(
        text=target.text, spans=tuple(spans), note_id=target.note_id, index=target.index
    )


def split_sizes(n: int) -> tuple[int, int, int]:
    """8:1:1 partition sizes: floor 80% train, half the remainder validation."""
    train = (8 * n) // 10
    remainder = n - train
    validation = remainder // 2
    return train, validation, remainder - validation


def split_dataset(examples: Sequence[SeedExample], rng_seed: int) -> SeedSplit:
    """Seeded-shuffle split into train/validation/test by the 8:1:1 rule."""
    if len(examples) < 3:
        raise ValueError(f"need at least 3 examples to split, got {len(examples)}")
    shuffled = list(examples)
    random.Random(rng_seed).shuffle(shuffled)
    n_train, n_val, _ = split_sizes(len(shuffled))
    return SeedSplit(
        train=tuple(shuffled[:n_train]),
        validation=tuple(shuffled[n_train : n_train + n_val]),
        test=tuple(shuffled[n_train + n_val :]),
        rng_seed=rng_seed,
    )


def emit_training_file(split_part: Iterable[SeedExample], path: str | Path) -> None:
    """Write examples as a JSON array, sorted by (note_id, index), stable keys."""
    ordered = sorted(split_part, key=lambda e: (e.note_id, e.index))
    payload = [
        {
            "text": example.text,
            "entities": [
                {"start": s.start, "end": s.end, "label": s.label} for s in example.spans
            ],
        }
        for example in ordered
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def load_training_file(path: str | Path) -> list[SeedExample]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return [
        SeedExample(
            text=item["text"],
            spans=tuple(
                EntitySpan(start=e["start"], end=e["end"], label=e["label"])
                for e in item["entities"]
            ),
        )
        for item in payload
    ]
