"""Seed-file loading, tokenization, vocabulary, and BIO tag encoding.

Seed files are JSON arrays of {"text", "entities": [{"start", "end",
"label"}]} with character offsets (end-exclusive) and labels STAGE /
GRADE / EXTENT. Tokens are maximal alphanumeric runs; a token belongs to
an entity when it lies fully inside the span.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

ENTITY_LABELS = ("STAGE", "GRADE", "EXTENT")
TAGS = ("O",) + tuple(f"{prefix}-{label}" for label in ENTITY_LABELS for prefix in ("B", "I"))
TAG_TO_ID = {tag: i for i, tag in enumerate(TAGS)}

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class SeedSchemaError(ValueError):
    """A seed file does not match the training-file schema."""


@dataclass(frozen=True)
class Token:
    text: str  # lowercased
    start: int
    end: int


@dataclass(frozen=True)
class TaggedSentence:
    text: str
    tokens: tuple[Token, ...]
    tag_ids: tuple[int, ...]


def tokenize(text: str) -> list[Token]:
    return [Token(m.group(0).lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def load_seed_file(path: str | Path) -> list[dict]:
    """Load and validate a seed file; raises SeedSchemaError before training."""
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SeedSchemaError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise SeedSchemaError(f"{path}: expected a JSON array")
    for i, item in enumerate(payload):
        if not isinstance(item, dict) or not isinstance(item.get("text"), str):
            raise SeedSchemaError(f"{path}: item {i}: missing \"text\"")
        entities = item.get("entities")
        if not isinstance(entities, list):
            raise SeedSchemaError(f"{path}: item {i}: missing \"entities\" list")
        for entity in entities:
            try:
                start, end, label = entity["start"], entity["end"], entity["label"]
            except (TypeError, KeyError) as exc:
                raise SeedSchemaError(f"{path}: item {i}: malformed entity {entity!r}") from exc
            if not (isinstance(start, int) and isinstance(end, int)
                    and 0 <= start < end <= len(item["text"])):
                raise SeedSchemaError(
                    f"{path}: item {i}: span ({start}, {end}) outside text bounds"
                )
            if label not in ENTITY_LABELS:
                raise SeedSchemaError(f"{path}: item {i}: unknown label {label!r}")
    return payload


def encode_tags(text: str, entities: list[dict]) -> TaggedSentence:
    """BIO tags per token; tokens fully inside a span carry its label."""
    tokens = tuple(tokenize(text))
    tags = ["O"] * len(tokens)
    for entity in sorted(entities, key=lambda e: e["start"]):
        inside = [i for i, t in enumerate(tokens)
                  if t.start >= entity["start"] and t.end <= entity["end"]]
        for position, token_index in enumerate(inside):
            tags[token_index] = f"{'B' if position == 0 else 'I'}-{entity['label']}"
    return TaggedSentence(
        text=text, tokens=tokens, tag_ids=tuple(TAG_TO_ID[t] for t in tags)
    )


def decode_spans(tokens: list[Token], tag_ids: list[int]) -> list[tuple[int, int, str]]:
    """BIO runs back to character spans (start, end, label)."""
    spans = []
    current: tuple[int, int, str] | None = None
    for token, tag_id in zip(tokens, tag_ids):
        tag = TAGS[tag_id]
        if tag == "O":
            if current:
                spans.append(current)
                current = None
            continue
        prefix, label = tag.split("-", 1)
        if prefix == "B" or current is None or current[2] != label:
            if current:
                spans.append(current)
            current = (token.start, token.end, label)
        else:
            current = (current[0], token.end, label)
    if current:
        spans.append(current)
    return spans


def build_vocab(sentences: list[TaggedSentence]) -> dict[str, int]:
    vocab = {PAD_TOKEN: 0, UNK_TOKEN: 1}
    for sentence in sentences:
        for token in sentence.tokens:
            vocab.setdefault(token.text, len(vocab))
    return vocab


def token_ids(tokens: tuple[Token, ...] | list[Token], vocab: dict[str, int]) -> list[int]:
    unk = vocab[UNK_TOKEN]
    return [vocab.get(t.text, unk) for t in tokens]
