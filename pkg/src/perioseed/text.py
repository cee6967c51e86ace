"""Offset-preserving tokenization shared by the extractor, filter, and span locator."""

from __future__ import annotations

import re
from typing import NamedTuple

# A token is a maximal run of alphanumeric characters; everything else
# (punctuation, slashes, whitespace) separates tokens. [^\W_] is the
# unicode-aware alphanumeric class (\w minus underscore).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class Token(NamedTuple):
    text: str  # lowercased
    start: int
    end: int  # exclusive


def tokenize(text: str) -> list[Token]:
    """Split text into lowercased alphanumeric tokens with character offsets."""
    return [Token(m.group(0).lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def token_texts(text: str) -> list[str]:
    """Just the lowercased token strings of *text*."""
    return [m.group(0).lower() for m in _TOKEN_RE.finditer(text)]


def find_token_runs(haystack: list[Token], needle: list[str]) -> list[int]:
    """Indices i such that haystack[i:i+len(needle)] spells *needle*.

    Empty needles match nowhere (a value with no alphanumeric content is
    never considered present).
    """
    if not needle:
        return []
    n = len(needle)
    hits = []
    for i in range(len(haystack) - n + 1):
        if all(haystack[i + j].text == needle[j] for j in range(n)):
            hits.append(i)
    return hits
