"""End-to-end seed-generation runs and the experiment grid.

A run prompts the backend once (combined) or three times (separate) per
non-empty sentence, parses and filters the completions, normalizes the
surviving fields, locates entity spans, and writes:

    train.json / dev.json / test.json   seed files (8:1:1 split)
    predictions.jsonl                   per-note most-severe diagnosis
    manifest.json                       config echo + tallies

Progress is checkpointed per note (checkpoint.jsonl) so an aborted run
can resume; the checkpoint is removed once a run completes. Outputs are
byte-stable: identical config and corpus give identical files.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from .backend import Backend, BackendUnavailable, CompletionRequest, make_backend
from .config import ExperimentConfig
from .corpus import ClinicalNote, Sentence, load_gold, load_notes, segment_sentences
from .evaluation import evaluate_notes, write_report_csv, write_report_json
from .extraction import (
    DEFAULT_RULES,
    ExamplePool,
    extract_candidates,
    load_example_pool,
    load_rules,
    pool_for_config,
    sample_examples,
)
from .prompting import (
    CATEGORIES,
    MalformedCompletion,
    PromptConfig,
    build_prompt_combined,
    build_prompt_separate,
    parse_completion_combined,
    parse_completion_separate,
    verify_presence,
)
from .seeding import (
    CanonicalDiagnosis,
    EntitySpan,
    SeedExample,
    emit_training_file,
    load_training_file,
    locate_spans,
    normalize,
    select_most_severe,
    split_dataset,
)

CHECKPOINT_NAME = "checkpoint.jsonl"
MANIFEST_NAME = "manifest.json"


@dataclass
class SentenceOutcome:
    note_id: str
    index: int
    malformed: bool = False
    raw: Optional[dict] = None
    retained: Optional[dict] = None
    rejected: tuple[tuple[str, str], ...] = ()
    canonical: Optional[dict] = None
    spans: tuple[tuple[int, int, str], ...] = ()

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "malformed": self.malformed,
            "raw": self.raw,
            "retained": self.retained,
            "rejected": [list(r) for r in self.rejected],
            "canonical": self.canonical,
            "spans": [list(s) for s in self.spans],
        }

    @classmethod
    def from_json(cls, note_id: str, data: dict) -> "SentenceOutcome":
        return cls(
            note_id=note_id,
            index=data["index"],
            malformed=data["malformed"],
            raw=data["raw"],
            retained=data["retained"],
            rejected=tuple((f, v) for f, v in data["rejected"]),
            canonical=data["canonical"],
            spans=tuple((s[0], s[1], s[2]) for s in data["spans"]),
        )


@dataclass
class SeedRunResult:
    outcomes: list[SentenceOutcome]
    seeds: list[SeedExample]
    predictions: list[tuple[str, CanonicalDiagnosis]]
    counts: dict


def _diag_dict(d) -> dict:
    return {"stage": d.stage, "grade": d.grade, "extent": d.extent}


def _complete_sentence(
    backend: Backend, pool: ExamplePool, sentence: Sentence, config: PromptConfig,
    max_tokens: int, temperature: float, stop: tuple[str, ...],
) -> SentenceOutcome:
    outcome = SentenceOutcome(note_id=sentence.note_id, index=sentence.index)

    def ask(prompt_text: str) -> str:
        return backend.complete(
            CompletionRequest(
                prompt=prompt_text, max_tokens=max_tokens, temperature=temperature, stop=stop
            )
        )

    if config.generation_type == "combined":
        prompt = build_prompt_combined(pool, sentence, config)
        try:
            raw = parse_completion_combined(ask(prompt.text))
        except MalformedCompletion:
            outcome.malformed = True
            return outcome
    else:
        completions = tuple(
            ask(build_prompt_separate(pool, sentence, config, category).text)
            for category in CATEGORIES
        )
        raw = parse_completion_separate(completions)  # type: ignore[arg-type]

    outcome.raw = _diag_dict(raw)
    filtered = verify_presence(raw, sentence)
    outcome.retained = _diag_dict(filtered.raw)
    outcome.rejected = filtered.rejected_fields
    outcome.canonical = _diag_dict(normalize(filtered))
    example = locate_spans(sentence, filtered)
    outcome.spans = tuple((s.start, s.end, s.label) for s in example.spans)
    return outcome


def build_pool(config: ExperimentConfig, notes: list[ClinicalNote]) -> ExamplePool:
    prompt_config = config.prompt_config()
    if config.examples_file:
        return pool_for_config(
            load_example_pool(config.examples_file), prompt_config.n_pos, prompt_config.n_neg
        )
    rules = load_rules(config.rules) if config.rules else DEFAULT_RULES
    sentences = [s for note in notes for s in segment_sentences(note)]
    candidates = extract_candidates(sentences, rules)
    return sample_examples(
        candidates, prompt_config.n_pos, prompt_config.n_neg, config.rng_seed
    )


def _load_checkpoint(path: Path) -> dict[str, list[SentenceOutcome]]:
    done: dict[str, list[SentenceOutcome]] = {}
    if not path.exists():
        return done
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            note_id = record["note_id"]
            done[note_id] = [
                SentenceOutcome.from_json(note_id, s) for s in record["sentences"]
            ]
    return done


def run_seed(
    config: ExperimentConfig,
    backend: Optional[Backend] = None,
    resume: bool = False,
) -> SeedRunResult:
    """Execute one seed-generation run and write its output directory."""
    if not config.corpus:
        raise ValueError("config.corpus is required")
    if not config.out:
        raise ValueError("config.out is required")
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out_dir / CHECKPOINT_NAME

    notes = load_notes(config.corpus)
    pool = build_pool(config, notes)
    prompt_config = config.prompt_config()
    if backend is None:
        backend = make_backend(config.backend)

    completed = _load_checkpoint(checkpoint_path) if resume else {}
    if not resume and checkpoint_path.exists():
        checkpoint_path.unlink()

    notes_sorted = sorted(notes, key=lambda n: n.id)
    all_outcomes: list[SentenceOutcome] = []
    texts: dict[tuple[str, int], str] = {}
    try:
        with open(checkpoint_path, "a", encoding="utf-8") as ckpt, ThreadPoolExecutor(
            max_workers=max(1, config.backend.concurrency)
        ) as executor:
            for note in notes_sorted:
                sentences = segment_sentences(note)
                for s in sentences:
                    texts[(note.id, s.index)] = s.text
                if note.id in completed:
                    all_outcomes.extend(completed[note.id])
                    continue
                targets = [s for s in sentences if s.text.strip()]
                futures = [
                    executor.submit(
                        _complete_sentence,
                        backend,
                        pool,
                        target,
                        prompt_config,
                        config.backend.max_tokens,
                        config.backend.temperature,
                        config.backend.stop,
                    )
                    for target in targets
                ]
                outcomes = sorted((f.result() for f in futures), key=lambda o: o.index)
                ckpt.write(
                    json.dumps(
                        {"note_id": note.id, "sentences": [o.to_json() for o in outcomes]},
                        ensure_ascii=False,
                    )
                    + "\n"
                )
                ckpt.flush()
                all_outcomes.extend(outcomes)
    except BackendUnavailable:
        # completed notes stay in the checkpoint for --resume
        raise

    result = _assemble(config, notes_sorted, all_outcomes, texts)
    _write_outputs(config, result, out_dir)
    checkpoint_path.unlink(missing_ok=True)
    return result


def _assemble(
    config: ExperimentConfig,
    notes_sorted: list[ClinicalNote],
    outcomes: list[SentenceOutcome],
    texts: dict[tuple[str, int], str],
) -> SeedRunResult:
    outcomes = sorted(outcomes, key=lambda o: (o.note_id, o.index))
    seeds: list[SeedExample] = []
    for outcome in outcomes:
        if outcome.spans:
            seeds.append(
                SeedExample(
                    text=texts[(outcome.note_id, outcome.index)],
                    spans=tuple(EntitySpan(*span) for span in outcome.spans),
                    note_id=outcome.note_id,
                    index=outcome.index,
                )
            )

    by_note: dict[str, list[CanonicalDiagnosis]] = {}
    for outcome in outcomes:
        if outcome.canonical is None:
            continue
        diagnosis = CanonicalDiagnosis(**outcome.canonical)
        if not diagnosis.is_empty():
            by_note.setdefault(outcome.note_id, []).append(diagnosis)
    predictions = [
        (
            note.id,
            select_most_severe(by_note[note.id]) if note.id in by_note else CanonicalDiagnosis(),
        )
        for note in notes_sorted
    ]

    counts = {
        "notes": len(notes_sorted),
        "target_sentences": len(outcomes),
        "malformed_completions": sum(1 for o in outcomes if o.malformed),
        "fields_rejected": sum(len(o.rejected) for o in outcomes),
        "seed_sentences": len(seeds),
    }
    return SeedRunResult(
        outcomes=outcomes, seeds=seeds, predictions=predictions, counts=counts
    )


def _write_outputs(config: ExperimentConfig, result: SeedRunResult, out_dir: Path) -> None:
    if len(result.seeds) >= 3:
        split = split_dataset(result.seeds, config.rng_seed)
        emit_training_file(split.train, out_dir / "train.json")
        emit_training_file(split.validation, out_dir / "dev.json")
        emit_training_file(split.test, out_dir / "test.json")
        split_counts = {
            "train": len(split.train),
            "dev": len(split.validation),
            "test": len(split.test),
        }
    else:
        split_counts = {"train": 0, "dev": 0, "test": 0}

    with open(out_dir / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for note_id, diagnosis in result.predictions:
            fh.write(
                json.dumps(
                    {
                        "id": note_id,
                        "stage": diagnosis.stage,
                        "grade": diagnosis.grade,
                        "extent": diagnosis.extent,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )

    manifest = {
        "config": config.to_dict(),
        "counts": {**result.counts, "split": split_counts},
    }
    with open(out_dir / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def cell_name(generation_type: str, sample_size: int, ratio) -> str:
    return f"{generation_type}_s{sample_size}_r{ratio.numerator}-{ratio.denominator}"


def run_grid(
    config: ExperimentConfig,
    backend: Optional[Backend] = None,
    resume: bool = False,
) -> dict:
    """Run every grid cell; cell failures are recorded, not fatal.

    With resume=True, cells whose manifest already exists are skipped.
    Returns the grid summary (also written to summary.json / summary.csv).
    """
    if not config.out:
        raise ValueError("config.out is required")
    grid_dir = Path(config.out)
    grid_dir.mkdir(parents=True, exist_ok=True)
    gold = load_gold(config.gold) if config.gold else None

    cells = []
    for generation_type in config.grid.generation_types:
        for sample_size in config.grid.sample_sizes:
            for ratio in config.grid.negative_ratios:
                cells.append((generation_type, sample_size, ratio))

    summary_rows = []
    for generation_type, sample_size, ratio in cells:
        name = cell_name(generation_type, sample_size, ratio)
        cell_dir = grid_dir / name
        row: dict = {
            "cell": name,
            "generation_type": generation_type,
            "sample_size": sample_size,
            "negative_ratio": str(ratio),
        }
        if resume and (cell_dir / MANIFEST_NAME).exists():
            row["status"] = "skipped"
            summary_rows.append(row)
            continue
        cell_config = replace(
            config,
            out=str(cell_dir),
            sample_size=sample_size,
            negative_ratio=ratio,
            generation_type=generation_type,
        )
        try:
            result = run_seed(cell_config, backend=backend, resume=resume)
        except Exception as exc:  # record and move on
            row["status"] = "failed"
            row["error"] = f"{type(exc).__name__}: {exc}"
            summary_rows.append(row)
            continue
        row["status"] = "ok"
        row.update(result.counts)
        if gold is not None:
            report = evaluate_notes(gold, result.predictions)
            write_report_json(report, cell_dir / "report.json")
            write_report_csv(report, cell_dir / "report.csv")
            for category, cat in report.categories.items():
                row[f"{category}_macro_f1"] = round(cat.macro_avg.f1, 6)
                row[f"{category}_weighted_f1"] = round(cat.weighted_avg.f1, 6)
        summary_rows.append(row)

    summary = {"cells": summary_rows}
    with open(grid_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    _write_grid_csv(summary_rows, grid_dir / "summary.csv")
    return summary


def _write_grid_csv(rows: list[dict], path: Path) -> None:
    import csv

    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def evaluate_files(gold_path: str, predictions_path: str, out_dir: str) -> dict:
    """Score a predictions file against a gold file; write JSON + CSV reports."""
    gold = load_gold(gold_path)
    predictions: list[tuple[str, CanonicalDiagnosis]] = []
    with open(predictions_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                diagnosis = CanonicalDiagnosis(
                    stage=obj.get("stage"), grade=obj.get("grade"), extent=obj.get("extent")
                )
                note_id = obj["id"]
            except (ValueError, KeyError) as exc:
                raise ValueError(f"predictions line {lineno}: {exc}") from exc
            predictions.append((note_id, diagnosis))
    report = evaluate_notes(gold, predictions)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_json(report, out / "report.json")
    write_report_csv(report, out / "report.csv")
    return {"report": str(out / "report.json"), "notes": report.notes_evaluated}


def run_split(seed_file: str, out_dir: str, rng_seed: int) -> dict:
    """Standalone 8:1:1 split of an existing seed file."""
    examples = [
        # file position is the ordering key for files without note ids
        SeedExample(text=e.text, spans=e.spans, note_id="seedfile", index=i)
        for i, e in enumerate(load_training_file(seed_file))
    ]
    split = split_dataset(examples, rng_seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emit_training_file(split.train, out / "train.json")
    emit_training_file(split.validation, out / "dev.json")
    emit_training_file(split.test, out / "test.json")
    counts = {
        "total": len(examples),
        "train": len(split.train),
        "dev": len(split.validation),
        "test": len(split.test),
    }
    with open(out / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump({"rng_seed": rng_seed, "counts": counts}, fh, indent=2)
        fh.write("\n")
    return counts
