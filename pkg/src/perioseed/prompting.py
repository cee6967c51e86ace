"""Few-shot prompt assembly, completion parsing, and hallucination filtering.

The prompt layout is normative and frozen by golden files:

    d: <example sentence>
    Stage/Grade/Extent: <stage>/<grade>/<extent>

    d: <example sentence>
    Stage/Grade/Extent: None/None/None

    d: <target sentence>
    Stage/Grade/Extent:

One blank line between blocks, a single space after the colon in example
answers, absent fields rendered as "None", and no trailing newline after
the final cue. The separate generation type uses one category per prompt
("Stage:", "Grade:" or "Extent:") with the same example ordering.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Optional

from .corpus import Sentence
from .text import find_token_runs, token_texts, tokenize
from .vocab import CATEGORIES

if TYPE_CHECKING:
    from .extraction import ExamplePool

GENERATION_TYPES = ("combined", "separate")

COMBINED_CUE = "Stage/Grade/Extent:"
SEPARATE_CUES = {"stage": "Stage:", "grade": "Grade:", "extent": "Extent:"}


class MalformedCompletion(ValueError):
    """A combined completion did not split into exactly three fields."""


@dataclass(frozen=True)
class RawDiagnosis:
    """Stage/grade/extent strings exactly as generated (lowercased), or None."""

    stage: Optional[str] = None
    grade: Optional[str] = None
    extent: Optional[str] = None

    def get(self, category: str) -> Optional[str]:
        return getattr(self, category)

    def present_fields(self) -> list[str]:
        return [c for c in CATEGORIES if self.get(c) is not None]


@dataclass(frozen=True)
class PromptConfig:
    """One experiment cell: example count, negative share, generation type."""

    sample_size: int
    negative_ratio: Fraction
    generation_type: str
    rng_seed: int

    def __post_init__(self) -> None:
        if self.generation_type not in GENERATION_TYPES:
            raise ValueError(f"generation_type must be one of {GENERATION_TYPES}")
        if self.sample_size < 1:
            raise ValueError("sample_size must be positive")
        if not 0 < self.negative_ratio < 1:
            raise ValueError("negative_ratio must be strictly between 0 and 1")
        if self.n_neg < 1 or self.n_pos < 1:
            raise ValueError(
                f"sample_size={self.sample_size} with ratio {self.negative_ratio} "
                "leaves fewer than one positive or negative example"
            )

    @property
    def n_neg(self) -> int:
        # floor of sample_size * ratio; the remainder goes to positives.
        return int(self.sample_size * self.negative_ratio)

    @property
    def n_pos(self) -> int:
        return self.sample_size - self.n_neg


@dataclass(frozen=True)
class PromptText:
    text: str
    target_sentence: Sentence
    category: Optional[str] = None  # set iff generation type is separate


@dataclass(frozen=True)
class FilteredDiagnosis:
    """A RawDiagnosis with only the fields whose values occur in the target."""

    raw: RawDiagnosis
    rejected_fields: tuple[tuple[str, str], ...] = ()


def parse_ratio(text: str | Fraction | float) -> Fraction:
    """Parse "1/3"-style ratio strings exactly (no float rounding)."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, float):
        return Fraction(text).limit_denominator(1000)
    return Fraction(text)


def _prefixed(text: str) -> str:
    """Prefix a sentence with "d: " unless it already starts that way."""
    if text.lower().startswith("d:"):
        return text
    return f"d: {text}"


def _rendered(value: Optional[str]) -> str:
    return value if value is not None else "None"


def render_answer_combined(raw: RawDiagnosis) -> str:
    return f"{_rendered(raw.stage)}/{_rendered(raw.grade)}/{_rendered(raw.extent)}"


def shuffled_examples(
    pool: "ExamplePool", config: PromptConfig
) -> list[tuple[Sentence, RawDiagnosis]]:
    """Positives and negatives interleaved by a seeded shuffle.

    Negatives carry an all-absent RawDiagnosis. The order depends only on
    (pool, rng_seed), so every target in a run sees the same examples.
    """
    if len(pool.positives) != config.n_pos or len(pool.negatives) != config.n_neg:
        raise ValueError(
            f"pool sized {len(pool.positives)}+/{len(pool.negatives)}- but config "
            f"needs {config.n_pos}+/{config.n_neg}-"
        )
    entries: list[tuple[Sentence, RawDiagnosis]] = [
        (cand.sentence, raw) for cand, raw in pool.positives
    ]
    entries += [(cand.sentence, RawDiagnosis()) for cand in pool.negatives]
    random.Random(config.rng_seed).shuffle(entries)
    return entries


def build_prompt_combined(pool: "ExamplePool", target: Sentence, config: PromptConfig) -> PromptText:
    """Render the all-labels-at-once prompt ending with "Stage/Grade/Extent:"."""
    blocks = [
        f"{_prefixed(sentence.text)}\n{COMBINED_CUE} {render_answer_combined(raw)}"
        for sentence, raw in shuffled_examples(pool, config)
    ]
    blocks.append(f"{_prefixed(target.text)}\n{COMBINED_CUE}")
    return PromptText(text="\n\n".join(blocks), target_sentence=target)


def build_prompt_separate(
    pool: "ExamplePool", target: Sentence, config: PromptConfig, category: str
) -> PromptText:
    """Render the one-label prompt for *category* ending with e.g. "Stage:"."""
    if category not in SEPARATE_CUES:
        raise ValueError(f"category must be one of {CATEGORIES}")
    cue = SEPARATE_CUES[category]
    blocks = [
        f"{_prefixed(sentence.text)}\n{cue} {_rendered(raw.get(category))}"
        for sentence, raw in shuffled_examples(pool, config)
    ]
    blocks.append(f"{_prefixed(target.text)}\n{cue}")
    return PromptText(text="\n\n".join(blocks), target_sentence=target, category=category)


def _clean_field(value: str) -> Optional[str]:
    value = value.strip().lower()
    if not value or value == "none":
        return None
    return value


def parse_completion_combined(completion: str) -> RawDiagnosis:
    """Parse "stage/grade/extent" from the first line of a completion.

    Fields are trimmed and lowercased; "none" or empty means absent.
    Raises MalformedCompletion unless exactly three fields are present.
    """
    first_line = completion.split("\n", 1)[0].strip()
    parts = first_line.split("/")
    if len(parts) != 3:
        raise MalformedCompletion(
            f"expected 3 slash-separated fields, got {len(parts)}: {first_line!r}"
        )
    stage, grade, extent = (_clean_field(p) for p in parts)
    return RawDiagnosis(stage=stage, grade=grade, extent=extent)


def parse_completion_separate(completions: tuple[str, str, str]) -> RawDiagnosis:
    """Assemble one RawDiagnosis from (stage, grade, extent) completions."""
    values = [_clean_field(c.split("\n", 1)[0]) for c in completions]
    return RawDiagnosis(stage=values[0], grade=values[1], extent=values[2])


def verify_presence(raw: RawDiagnosis, target: Sentence) -> FilteredDiagnosis:
    """Keep only fields whose value occurs in the target as whole tokens.

    A value is present when its token sequence appears contiguously among
    the target's tokens, case-insensitively. Values with no alphanumeric
    content are rejected.
    """
    target_tokens = tokenize(target.text)
    kept: dict[str, Optional[str]] = {}
    rejected: list[tuple[str, str]] = []
    for category in CATEGORIES:
        value = raw.get(category)
        if value is None:
            kept[category] = None
            continue
        if find_token_runs(target_tokens, token_texts(value)):
            kept[category] = value
        else:
            kept[category] = None
            rejected.append((category, value))
    return FilteredDiagnosis(raw=RawDiagnosis(**kept), rejected_fields=tuple(rejected))
