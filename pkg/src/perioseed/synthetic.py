"""Deterministic synthetic clinical-note corpus with known gold labels.

Notes are built from hand-written sentence templates. Positive sentences
are phrased so the reference extractor recovers exactly the diagnosis
they were built from; negative sentences avoid every trigger token
(staging/grading keywords, extent words, the disease name). That makes
the generated gold file exact ground truth for the mock-backend pipeline.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .corpus import ClinicalNote, GoldAnnotation
from .seeding import CanonicalDiagnosis, select_most_severe
from .vocab import STAGE_MAP

_NEGATIVE_SENTENCES = (
    "d: patient presents for periodic oral examination and prophylaxis",
    "pt reports mild sensitivity to cold on upper left molars",
    "oral hygiene instructions given, flossing technique reviewed",
    "no bleeding on probing noted today",
    "recall visit scheduled in six months",
    "medical history reviewed, no changes reported",
    "bitewing radiographs reviewed with patient",
    "scaling and root planing completed on lower right quadrant",
    "home care discussed, electric toothbrush recommended",
    "crown margins intact, no recurrent decay observed",
    "occlusion stable, no mobility detected",
    "patient tolerated procedure well, no complications",
)

_STAGE_SURFACES = {"I": ("i", "1"), "II": ("ii", "2"), "III": ("iii", "3"), "IV": ("iv", "4")}


@dataclass(frozen=True)
class _Positive:
    text: str
    diagnosis: CanonicalDiagnosis


def _render_positive(rng: random.Random) -> _Positive:
    stage_c = rng.choice(tuple(_STAGE_SURFACES))
    stage_s = rng.choice(_STAGE_SURFACES[stage_c])
    grade_c = rng.choice(("A", "B", "C"))
    grade_s = grade_c.lower()
    extent: Optional[str] = rng.choice(("localized", "generalized", None))
    ext_sp = f"{extent} " if extent else ""

    template = rng.randrange(8)
    if template == 0:
        text = f"d: {ext_sp}stage {stage_s} grade {grade_s} periodontitis"
    elif template == 1:
        text = f"tentative diagnosis: periodontitis stage {stage_s} grade {grade_s}, confirm needed."
        extent = None
    elif template == 2:
        text = f"d: {ext_sp}chronic periodontitis stage {stage_s} grade {grade_s}"
    elif template == 3:
        text = f"assessment: {ext_sp}periodontitis, stage {stage_s}, grade {grade_s}."
    elif template == 4:
        text = f"d: {ext_sp}periodontitis stage {stage_s}"
        grade_c = None  # type: ignore[assignment]
    elif template == 5:
        text = f"d: {ext_sp}periodontitis grade {grade_s}"
        stage_c = None  # type: ignore[assignment]
    elif template == 6:
        extent = extent or "generalized"
        text = f"impression: {extent} periodontitis"
        stage_c = None  # type: ignore[assignment]
        grade_c = None  # type: ignore[assignment]
    else:
        text = f"D: {ext_sp.capitalize()}Periodontitis Stage {stage_s.upper()} Grade {grade_c}"

    return _Positive(
        text=text,
        diagnosis=CanonicalDiagnosis(stage=stage_c, grade=grade_c, extent=extent),
    )


def make_synthetic_corpus(
    n_notes: int, rng_seed: int
) -> tuple[list[ClinicalNote], list[GoldAnnotation]]:
    """Build *n_notes* notes plus their per-note most-severe gold labels.

    Roughly a quarter of the notes carry no diagnosis; the rest carry one
    or two diagnosis sentences mixed into routine charting prose.
    """
    rng = random.Random(rng_seed)
    width = max(4, len(str(n_notes)))
    notes: list[ClinicalNote] = []
    gold: list[GoldAnnotation] = []
    for i in range(n_notes):
        note_id = f"note-{i:0{width}d}"
        n_negative = rng.randint(2, 6)
        n_positive = rng.choices((0, 1, 2), weights=(25, 55, 20))[0]
        lines: list[_Positive | str] = [
            rng.choice(_NEGATIVE_SENTENCES) for _ in range(n_negative)
        ]
        positives = [_render_positive(rng) for _ in range(n_positive)]
        for positive in positives:
            lines.insert(rng.randint(0, len(lines)), positive)
        # occasional blank line, exercising lossless empty segments
        if rng.random() < 0.15:
            lines.insert(rng.randint(0, len(lines)), "")

        text = "\n".join(p.text if isinstance(p, _Positive) else p for p in lines)
        ordered_diagnoses = [p.diagnosis for p in lines if isinstance(p, _Positive)]
        if ordered_diagnoses:
            severe = select_most_severe(ordered_diagnoses)
        else:
            severe = CanonicalDiagnosis()
        notes.append(ClinicalNote(id=note_id, text=text))
        gold.append(
            GoldAnnotation(
                note_id=note_id, stage=severe.stage, grade=severe.grade, extent=severe.extent
            )
        )
    return notes, gold


def stage_surface_forms() -> dict[str, str]:
    """Surface token -> canonical stage, exposed for tests."""
    return dict(STAGE_MAP)
