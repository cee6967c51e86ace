"""perioseed: few-shot LLM seed generation and evaluation for periodontal diagnosis NER."""

__version__ = "0.1.0"

from .corpus import ClinicalNote, GoldAnnotation, Sentence, load_gold, load_notes, segment_sentences
from .evaluation import EvalReport, aggregate, confusion, evaluate_notes, metrics
from .extraction import CandidateSentence, ExamplePool, RulePattern, extract_candidates, sample_examples
from .prompting import (
    FilteredDiagnosis,
    MalformedCompletion,
    PromptConfig,
    PromptText,
    RawDiagnosis,
    build_prompt_combined,
    build_prompt_separate,
    parse_completion_combined,
    parse_completion_separate,
    verify_presence,
)
from .seeding import (
    CanonicalDiagnosis,
    SeedExample,
    SeedSplit,
    locate_spans,
    normalize,
    select_most_severe,
    severity_key,
    split_dataset,
)

__all__ = [
    "__version__",
    "ClinicalNote", "Sentence", "GoldAnnotation",
    "load_notes", "load_gold", "segment_sentences",
    "RulePattern", "CandidateSentence", "ExamplePool",
    "extract_candidates", "sample_examples",
    "PromptConfig", "RawDiagnosis", "PromptText", "FilteredDiagnosis",
    "MalformedCompletion",
    "build_prompt_combined", "build_prompt_separate",
    "parse_completion_combined", "parse_completion_separate", "verify_presence",
    "CanonicalDiagnosis", "SeedExample", "SeedSplit",
    "normalize", "severity_key", "select_most_severe", "locate_spans", "split_dataset",
    "EvalReport", "confusion", "metrics", "aggregate", "evaluate_notes",
]
