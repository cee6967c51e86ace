"""Training loop and dev-set span scoring."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch
from torch import nn

from .data import (
    TaggedSentence,
    build_vocab,
    decode_spans,
    encode_tags,
    load_seed_file,
    token_ids,
)
from .model import TokenTagger, load_model, resolve_spec, save_model


@dataclass(frozen=True)
class TrainConfig:
    train: str
    dev: str
    out: str
    base_model: str = "builtin:small"
    epochs: int = 30
    learning_rate: float = 3e-4
    batch_size: int = 32
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        for name in ("train", "dev"):
            if not Path(getattr(self, name)).exists():
                raise ValueError(f"{name} file not found: {getattr(self, name)}")


@dataclass
class TrainResult:
    model_dir: str
    dev_precision: float
    dev_recall: float
    dev_f1: float
    epochs: int


def config_from_file(path: str | Path) -> TrainConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    known = {f for f in TrainConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return TrainConfig(**data)


def _batches(sentences: list[TaggedSentence], vocab, batch_size, max_len, rng, shuffle):
    order = list(range(len(sentences)))
    if shuffle:
        rng.shuffle(order)
    for lo in range(0, len(order), batch_size):
        chunk = [sentences[i] for i in order[lo : lo + batch_size]]
        longest = min(max(len(s.tokens) for s in chunk), max_len)
        ids = torch.zeros(len(chunk), longest, dtype=torch.long)
        tags = torch.full((len(chunk), longest), -100, dtype=torch.long)
        pad = torch.ones(len(chunk), longest, dtype=torch.bool)
        for row, sentence in enumerate(chunk):
            toks = token_ids(sentence.tokens, vocab)[:longest]
            ids[row, : len(toks)] = torch.tensor(toks)
            tags[row, : len(toks)] = torch.tensor(sentence.tag_ids[:longest])
            pad[row, : len(toks)] = False
        yield ids, tags, pad


def _score_spans(model: TokenTagger, vocab, sentences: list[TaggedSentence],
                 max_len: int) -> tuple[float, float, float]:
    """Exact-match span precision/recall/F1 over the dev set."""
    model.eval()
    tp = fp = fn = 0
    with torch.no_grad():
        for sentence in sentences:
            if not sentence.tokens:
                continue
            toks = list(sentence.tokens)[:max_len]
            ids = torch.tensor([token_ids(toks, vocab)])
            pad = torch.zeros(1, len(toks), dtype=torch.bool)
            predicted_tags = model(ids, pad).argmax(-1)[0].tolist()
            gold = set(decode_spans(toks, list(sentence.tag_ids[: len(toks)])))
            pred = set(decode_spans(toks, predicted_tags))
            tp += len(gold & pred)
            fp += len(pred - gold)
            fn += len(gold - pred)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def _prepare(path: str) -> list[TaggedSentence]:
    return [encode_tags(item["text"], item["entities"]) for item in load_seed_file(path)]


def train(config: TrainConfig) -> TrainResult:
    """Fit the tagger on the seed files and save the model artifact."""
    train_sentences = [s for s in _prepare(config.train) if s.tokens]
    dev_sentences = _prepare(config.dev)
    if not train_sentences:
        raise ValueError("training file has no tokenized sentences")

    torch.manual_seed(config.rng_seed)
    rng = random.Random(config.rng_seed)
    spec = resolve_spec(config.base_model)
    if Path(config.base_model).is_dir():
        model, vocab = load_model(config.base_model)
    else:
        vocab = build_vocab(train_sentences)
        model = TokenTagger(vocab_size=len(vocab), spec=spec)

    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss(ignore_index=-100)
    model.train()
    for _ in range(config.epochs):
        for ids, tags, pad in _batches(train_sentences, vocab, config.batch_size,
                                       spec.max_len, rng, shuffle=True):
            optimizer.zero_grad()
            logits = model(ids, pad)
            loss = loss_fn(logits.reshape(-1, logits.shape[-1]), tags.reshape(-1))
            loss.backward()
            optimizer.step()

    precision, recall, f1 = _score_spans(model, vocab, dev_sentences, spec.max_len)
    save_model(model, vocab, config.out)
    with open(Path(config.out) / "dev_scores.json", "w", encoding="utf-8") as fh:
        json.dump({"precision": precision, "recall": recall, "f1": f1,
                   "epochs": config.epochs, "rng_seed": config.rng_seed}, fh, indent=2)
        fh.write("\n")
    return TrainResult(model_dir=config.out, dev_precision=precision,
                       dev_recall=recall, dev_f1=f1, epochs=config.epochs)
