"""perioseed-trainer command line: train | predict."""

from __future__ import annotations

import json

import click

from .data import SeedSchemaError
from .prediction import predict as run_predict
from .training import config_from_file, train as run_train


@click.group()
def main() -> None:
    """Fine-tune a token-classification model on perioseed seed files."""


@main.command()
@click.option("--config", "config_path", type=str, required=True,
              help="JSON file with train/dev paths, out dir, and hyperparameters.")
def train(config_path) -> None:
    """Train on seed files and report dev-set span scores."""
    try:
        config = config_from_file(config_path)
        result = run_train(config)
    except (SeedSchemaError, ValueError, FileNotFoundError) as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps({
        "model_dir": result.model_dir,
        "dev_precision": round(result.dev_precision, 6),
        "dev_recall": round(result.dev_recall, 6),
        "dev_f1": round(result.dev_f1, 6),
    }))


@main.command()
@click.option("--model", "model_dir", type=str, required=True)
@click.option("--notes", "notes_path", type=str, required=True)
@click.option("--out", "out_path", type=str, required=True)
def predict(model_dir, notes_path, out_path) -> None:
    """Write per-note diagnosis predictions in the evaluator's schema."""
    try:
        count = run_predict(model_dir, notes_path, out_path)
    except (FileNotFoundError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {count} predictions to {out_path}")


if __name__ == "__main__":
    main()
