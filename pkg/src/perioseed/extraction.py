"""Rule-based candidate detection and prompt-example sampling.

A sentence is a positive candidate when any rule matches it. The default
rule set marks a sentence positive when it mentions periodontitis, or
when it carries both a staging token and a grading token; extent words
alone never qualify. Rules are config-overridable via a JSONL file of
{"name", "pattern"} objects (patterns compile case-insensitively).
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .backend import oracle_extract
from .corpus import Sentence
from .prompting import RawDiagnosis


class RuleError(ValueError):
    """A rule pattern failed to compile or a rule name repeats."""


class InsufficientExamples(ValueError):
    """Fewer candidates available than the requested sample needs."""


@dataclass(frozen=True)
class RulePattern:
    name: str
    pattern: str

    def compile(self) -> re.Pattern[str]:
        try:
            return re.compile(self.pattern, re.IGNORECASE)
        except re.error as exc:
            raise RuleError(f"rule {self.name!r}: pattern does not compile: {exc}") from exc


DEFAULT_RULES = (
    RulePattern(name="periodontitis", pattern=r"periodontitis"),
    RulePattern(
        name="staged_graded",
        pattern=r"(?=.*\bstage\b.*?\b(?:i{1,3}|iv|[1-4])\b)(?=.*\bgrade\b.*?\b[abc]\b)",
    ),
)


@dataclass(frozen=True)
class CandidateSentence:
    sentence: Sentence
    matched_rules: tuple[str, ...]
    polarity: str  # "positive" | "negative"

    def __post_init__(self) -> None:
        if self.polarity == "positive" and not self.matched_rules:
            raise ValueError("positive candidate must match at least one rule")
        if self.polarity == "negative" and self.matched_rules:
            raise ValueError("negative candidate must match no rules")


@dataclass(frozen=True)
class ExamplePool:
    positives: tuple[tuple[CandidateSentence, RawDiagnosis], ...]
    negatives: tuple[CandidateSentence, ...]


def load_rules(path: str | Path) -> list[RulePattern]:
    rules: list[RulePattern] = []
    names: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            name, pattern = obj.get("name"), obj.get("pattern")
            if not isinstance(name, str) or not isinstance(pattern, str):
                raise RuleError(f"line {lineno}: rules need string \"name\" and \"pattern\"")
            if name in names:
                raise RuleError(f"line {lineno}: duplicate rule name {name!r}")
            names.add(name)
            rule = RulePattern(name=name, pattern=pattern)
            rule.compile()
            rules.append(rule)
    return rules


def extract_candidates(
    sentences: Iterable[Sentence], rules: Sequence[RulePattern] = DEFAULT_RULES
) -> list[CandidateSentence]:
    """Classify each non-empty sentence; empty sentences are dropped."""
    if not rules:
        raise ValueError("at least one rule is required")
    compiled = [(rule.name, rule.compile()) for rule in rules]
    candidates: list[CandidateSentence] = []
    for sentence in sentences:
        if not sentence.text.strip():
            continue
        matched = tuple(name for name, rx in compiled if rx.search(sentence.text))
        candidates.append(
            CandidateSentence(
                sentence=sentence,
                matched_rules=matched,
                polarity="positive" if matched else "negative",
            )
        )
    return candidates


def sample_examples(
    candidates: Sequence[CandidateSentence], n_pos: int, n_neg: int, rng_seed: int
) -> ExamplePool:
    """Sample prompt examples without replacement, deterministically.

    Candidates are ordered by (note_id, index) first so the draw does not
    depend on input ordering. Positives get their answer diagnosis from
    the reference extractor. Negatives are preferred from notes that also
    contain a positive sentence; if too few exist, any negative fills in.
    """
    ordered = sorted(candidates, key=lambda c: (c.sentence.note_id, c.sentence.index))
    positives = [c for c in ordered if c.polarity == "positive"]
    negatives = [c for c in ordered if c.polarity == "negative"]
    if len(positives) < n_pos:
        raise InsufficientExamples(
            f"need {n_pos} positive examples, only {len(positives)} available"
        )
    if len(negatives) < n_neg:
        raise InsufficientExamples(
            f"need {n_neg} negative examples, only {len(negatives)} available"
        )
    rng = random.Random(rng_seed)
    chosen_pos = rng.sample(positives, n_pos)

    positive_notes = {c.sentence.note_id for c in positives}
    in_domain = [c for c in negatives if c.sentence.note_id in positive_notes]
    if len(in_domain) >= n_neg:
        chosen_neg = rng.sample(in_domain, n_neg)
    else:
        rest = [c for c in negatives if c.sentence.note_id not in positive_notes]
        chosen_neg = in_domain + rng.sample(rest, n_neg - len(in_domain))

    return ExamplePool(
        positives=tuple((c, oracle_extract(c.sentence)) for c in chosen_pos),
        negatives=tuple(chosen_neg),
    )


def load_example_pool(path: str | Path) -> ExamplePool:
    """Build a pool from a hand-edited example file.

    JSONL rows: {"text", "stage", "grade", "extent", "polarity"}. Values
    are lowercased so rendered answers parse back to the same diagnosis.
    """
    positives: list[tuple[CandidateSentence, RawDiagnosis]] = []
    negatives: list[CandidateSentence] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            text, polarity = obj.get("text"), obj.get("polarity")
            if not isinstance(text, str) or polarity not in ("positive", "negative"):
                raise ValueError(
                    f"line {lineno}: example rows need \"text\" and a "
                    "\"positive\"/\"negative\" polarity"
                )
            sentence = Sentence(note_id="examples", index=lineno, text=text)
            if polarity == "positive":
                raw = RawDiagnosis(
                    stage=_lower(obj.get("stage")),
                    grade=_lower(obj.get("grade")),
                    extent=_lower(obj.get("extent")),
                )
                candidate = CandidateSentence(
                    sentence=sentence, matched_rules=("curated",), polarity="positive"
                )
                positives.append((candidate, raw))
            else:
                negatives.append(
                    CandidateSentence(sentence=sentence, matched_rules=(), polarity="negative")
                )
    return ExamplePool(positives=tuple(positives), negatives=tuple(negatives))


def _lower(value: Optional[str]) -> Optional[str]:
    return value.lower() if isinstance(value, str) and value.strip() else None


def pool_for_config(pool: ExamplePool, n_pos: int, n_neg: int) -> ExamplePool:
    """Trim a (possibly larger) pool to the exact sizes a prompt needs."""
    if len(pool.positives) < n_pos or len(pool.negatives) < n_neg:
        raise InsufficientExamples(
            f"pool has {len(pool.positives)}+/{len(pool.negatives)}-, "
            f"need {n_pos}+/{n_neg}-"
        )
    return ExamplePool(positives=pool.positives[:n_pos], negatives=pool.negatives[:n_neg])
