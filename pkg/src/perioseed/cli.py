"""perioseed command line: extract | seed | evaluate | grid | split | synth | version.

Exit codes: 0 success, 1 pipeline error, 2 usage/config error.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .backend import BackendUnavailable
from .config import ConfigError, ExperimentConfig, load_config
from .corpus import CorpusError, load_notes, save_gold, save_notes, segment_sentences
from .extraction import DEFAULT_RULES, extract_candidates, load_rules
from .pipeline import evaluate_files, run_grid, run_seed, run_split
from .prompting import parse_ratio
from .synthetic import make_synthetic_corpus


def _fail_usage(message: str) -> "click.ClickException":
    exc = click.UsageError(message)  # exits with code 2
    return exc


def _load_and_override(
    config_path: Optional[str],
    corpus: Optional[str],
    gold: Optional[str],
    out: Optional[str],
    rng_seed: Optional[int],
    backend: Optional[str],
    sample_size: Optional[int],
    ratio: Optional[str],
    generation_type: Optional[str],
    rules: Optional[str],
) -> ExperimentConfig:
    try:
        config = load_config(config_path)
        overrides: dict = {}
        if corpus is not None:
            overrides["corpus"] = corpus
        if gold is not None:
            overrides["gold"] = gold
        if out is not None:
            overrides["out"] = out
        if rng_seed is not None:
            overrides["rng_seed"] = rng_seed
        if sample_size is not None:
            overrides["sample_size"] = sample_size
        if ratio is not None:
            overrides["negative_ratio"] = parse_ratio(ratio)
        if generation_type is not None:
            overrides["generation_type"] = generation_type
        if rules is not None:
            overrides["rules"] = rules
        if backend is not None:
            overrides["backend"] = replace(config.backend, type=backend)
        return replace(config, **overrides) if overrides else config
    except (ConfigError, ValueError) as exc:
        raise _fail_usage(str(exc))


def _check_exists(path: Optional[str], what: str) -> str:
    if not path:
        raise _fail_usage(f"{what} path is required (flag or config)")
    if not Path(path).exists():
        raise _fail_usage(f"{what} file not found: {path}")
    return path


_config_option = click.option("--config", "config_path", type=str, default=None,
                              help="JSON config file; flags override its values.")
_seed_option = click.option("--seed", "rng_seed", type=int, default=None,
                            help="RNG seed override.")


@click.group()
def main() -> None:
    """Few-shot seed generation and evaluation for periodontal diagnosis NER."""


@main.command()
def version() -> None:
    """Print the package version."""
    click.echo(__version__)


@main.command()
@_config_option
@click.option("--corpus", type=str, default=None)
@click.option("--rules", type=str, default=None, help="JSONL rules file override.")
@click.option("--out", type=str, default=None, help="Output candidates JSONL path.")
def extract(config_path, corpus, rules, out) -> None:
    """Write rule-matched candidate sentences with polarity."""
    config = _load_and_override(config_path, corpus, None, out, None, None, None, None, None, rules)
    corpus_path = _check_exists(config.corpus, "corpus")
    if not config.out:
        raise _fail_usage("output path is required (--out)")
    try:
        notes = load_notes(corpus_path)
        rule_set = load_rules(config.rules) if config.rules else DEFAULT_RULES
        sentences = [s for note in notes for s in segment_sentences(note)]
        candidates = extract_candidates(sentences, rule_set)
        out_path = Path(config.out)
        if out_path.parent != Path(""):
            out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8") as fh:
            for c in candidates:
                fh.write(
                    json.dumps(
                        {
                            "note_id": c.sentence.note_id,
                            "index": c.sentence.index,
                            "text": c.sentence.text,
                            "polarity": c.polarity,
                            "matched_rules": list(c.matched_rules),
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        positives = sum(1 for c in candidates if c.polarity == "positive")
        click.echo(f"wrote {len(candidates)} candidates ({positives} positive) to {out_path}")
    except (CorpusError, ValueError) as exc:
        raise click.ClickException(str(exc))  # exit code 1


@main.command()
@_config_option
@click.option("--corpus", type=str, default=None)
@click.option("--out", type=str, default=None, help="Run output directory.")
@_seed_option
@click.option("--backend", type=click.Choice(["mock", "http"]), default=None)
@click.option("--sample-size", type=int, default=None)
@click.option("--ratio", type=str, default=None, help='Negative ratio, e.g. "1/3".')
@click.option("--type", "generation_type", type=click.Choice(["combined", "separate"]),
              default=None)
@click.option("--resume", is_flag=True, help="Continue from an aborted run's checkpoint.")
def seed(config_path, corpus, out, rng_seed, backend, sample_size, ratio,
         generation_type, resume) -> None:
    """Generate, filter, and split NER training seeds for one configuration."""
    config = _load_and_override(
        config_path, corpus, None, out, rng_seed, backend, sample_size, ratio,
        generation_type, None,
    )
    _check_exists(config.corpus, "corpus")
    if not config.out:
        raise _fail_usage("output directory is required (--out)")
    try:
        result = run_seed(config, resume=resume)
    except BackendUnavailable as exc:
        raise click.ClickException(
            f"backend unavailable, partial progress checkpointed: {exc}"
        )
    except (CorpusError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(result.counts))


@main.command()
@click.option("--gold", type=str, required=True)
@click.option("--predictions", type=str, required=True)
@click.option("--out", type=str, required=True, help="Report output directory.")
def evaluate(gold, predictions, out) -> None:
    """Score a predictions file against gold annotations."""
    _check_exists(gold, "gold")
    _check_exists(predictions, "predictions")
    try:
        info = evaluate_files(gold, predictions, out)
    except (CorpusError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(info))


@main.command()
@_config_option
@click.option("--corpus", type=str, default=None)
@click.option("--gold", type=str, default=None,
              help="Optional gold file; adds per-cell reports to the grid.")
@click.option("--out", type=str, default=None, help="Grid output directory.")
@_seed_option
@click.option("--backend", type=click.Choice(["mock", "http"]), default=None)
@click.option("--resume", is_flag=True, help="Skip cells that already have a manifest.")
def grid(config_path, corpus, gold, out, rng_seed, backend, resume) -> None:
    """Run every (sample size, negative ratio, generation type) cell."""
    config = _load_and_override(
        config_path, corpus, gold, out, rng_seed, backend, None, None, None, None
    )
    _check_exists(config.corpus, "corpus")
    if config.gold:
        _check_exists(config.gold, "gold")
    if not config.out:
        raise _fail_usage("output directory is required (--out)")
    try:
        summary = run_grid(config, resume=resume)
    except (CorpusError, ValueError) as exc:
        raise click.ClickException(str(exc))
    failed = [row["cell"] for row in summary["cells"] if row["status"] == "failed"]
    click.echo(f"grid complete: {len(summary['cells'])} cells, {len(failed)} failed")
    if failed:
        raise click.ClickException(f"failed cells: {', '.join(failed)}")


@main.command()
@click.option("--seeds", "seed_file", type=str, required=True, help="Seed JSON file.")
@click.option("--out", type=str, required=True, help="Split output directory.")
@_seed_option
def split(seed_file, out, rng_seed) -> None:
    """Split an existing seed file 8:1:1 into train/dev/test."""
    _check_exists(seed_file, "seed")
    try:
        counts = run_split(seed_file, out, rng_seed if rng_seed is not None else 0)
    except (ValueError, KeyError) as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(counts))


@main.command()
@click.option("--notes", "n_notes", type=int, default=200, show_default=True)
@_seed_option
@click.option("--out", type=str, required=True, help="Output directory.")
def synth(n_notes, rng_seed, out) -> None:
    """Write a synthetic corpus (notes.jsonl) with gold labels (gold.jsonl)."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    notes, gold = make_synthetic_corpus(n_notes, rng_seed if rng_seed is not None else 0)
    save_notes(notes, out_dir / "notes.jsonl")
    save_gold(gold, out_dir / "gold.jsonl")
    click.echo(f"wrote {len(notes)} notes to {out_dir}")


if __name__ == "__main__":
    main()
