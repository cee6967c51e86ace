"""Adapter-side normalization and severity ranking.

Re-specified against the same canonical tables as the seed pipeline rather
than imported from it; the shared test-vector file keeps the two
implementations in agreement.
"""

from __future__ import annotations

from typing import Optional

STAGES = ("I", "II", "III", "IV")
GRADES = ("A", "B", "C")
EXTENTS = ("localized", "generalized")

_STAGE_MAP = {
    "1": "I", "i": "I",
    "2": "II", "ii": "II",
    "3": "III", "iii": "III",
    "4": "IV", "iv": "IV",
}

_STRIP = " \t\r\n.,;:!?'\""


def normalize_stage(value: str) -> Optional[str]:
    return _STAGE_MAP.get(value.strip(_STRIP).lower())


def normalize_grade(value: str) -> Optional[str]:
    cleaned = value.strip(_STRIP).upper()
    return cleaned if cleaned in GRADES else None


def _edit_distance(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1,
                               previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def normalize_extent(value: str) -> Optional[str]:
    cleaned = value.strip(_STRIP).lower()
    if cleaned in EXTENTS:
        return cleaned
    distances = {word: _edit_distance(cleaned, word) for word in EXTENTS}
    best = min(distances.values())
    if best > 2:
        return None
    nearest = [word for word, d in distances.items() if d == best]
    return nearest[0] if len(nearest) == 1 else None


_NORMALIZERS = {"stage": normalize_stage, "grade": normalize_grade, "extent": normalize_extent}


def normalize_value(category: str, value: str) -> Optional[str]:
    return _NORMALIZERS[category](value)


_STAGE_RANK = {None: 0, "I": 1, "II": 2, "III": 3, "IV": 4}
_EXTENT_RANK = {None: 0, "localized": 1, "generalized": 2}
_GRADE_RANK = {None: 0, "A": 1, "B": 2, "C": 3}


def severity_key(stage: Optional[str], grade: Optional[str],
                 extent: Optional[str]) -> tuple[int, int, int]:
    """Stage outranks extent outranks grade; absent ranks lowest."""
    return (_STAGE_RANK[stage], _EXTENT_RANK[extent], _GRADE_RANK[grade])


def most_severe(diagnoses: list[dict]) -> dict:
    """Earliest maximal-severity diagnosis; all-null when the list is empty."""
    if not diagnoses:
        return {"stage": None, "grade": None, "extent": None}
    return max(diagnoses,
               key=lambda d: severity_key(d["stage"], d["grade"], d["extent"]))
