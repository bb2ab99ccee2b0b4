"""Finite words, eventually periodic codings and the gap order.

Words are plain strings over ``"01"``; the empty word is ``""`` and is
written ``e`` in every serialized form.  Infinite codings are stored as
a prefix followed by a repeating block.

The order on words and codings places a word ``w`` where its gap sits,
strictly between the codings ``w01^inf`` and ``w10^inf``.  Comparisons
reduce to lexicographic comparison of infinite sequences: a word ``w`` is
compared through the coding ``w10^inf`` (the right end of its gap).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cmp_to_key
from math import lcm

from .errors import CapacityError, DomainError

LESS, EQUAL, GREATER = -1, 0, 1

MAX_ENUM_LEN = 24

_CODING_RE = re.compile(r"^\s*([01]*|e)\(([01]+)\)\^inf\s*$")


def parse_word(text: str) -> str:
    """Parse the ASCII form of a word (``e`` for the empty word)."""
    text = text.strip()
    if text in ("e", ""):
        return ""
    if set(text) - {"0", "1"}:
        raise DomainError(f"not a binary word: {text!r}")
    return text


def format_word(w: str) -> str:
    return w if w else "e"


def _primitive_root(block: str) -> str:
    n = len(block)
    for d in range(1, n + 1):
        if n % d == 0 and block[:d] * (n // d) == block:
            return block[:d]
    return block


@dataclass(frozen=True)
class Coding:
    """Eventually periodic point of {0,1}^N, ``prefix`` then ``block`` forever.

    Instances are kept in canonical form (shortest prefix, primitive
    block), so dataclass equality is equality of infinite sequences.
    """

    prefix: str
    block: str

    def __post_init__(self):
        if not self.block:
            raise DomainError("coding block must be non-empty")
        if set(self.prefix + self.block) - {"0", "1"}:
            raise DomainError("codings use the letters 0 and 1 only")
        block = _primitive_root(self.block)
        prefix = self.prefix
        while prefix and prefix[-1] == block[-1]:
            block = block[-1] + block[:-1]
            prefix = prefix[:-1]
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "block", block)

    @classmethod
    def parse(cls, text: str) -> "Coding":
        """Parse the grammar ``prefix(block)^inf``, e.g. ``01(10)^inf``."""
        m = _CODING_RE.match(text)
        if not m:
            raise DomainError(f"cannot parse coding {text!r}; expected prefix(block)^inf")
        prefix = "" if m.group(1) == "e" else m.group(1)
        return cls(prefix, m.group(2))

    def __str__(self) -> str:
        return f"{self.prefix}({self.block})^inf"

    def head(self, n: int) -> str:
        """First ``n`` letters."""
        p = self.prefix
        if n <= len(p):
            return p[:n]
        k = n - len(p)
        reps = -(-k // len(self.block))
        return p + (self.block * reps)[:k]

    def letter(self, k: int) -> str:
        """Letter at 0-based position ``k``."""
        if k < len(self.prefix):
            return self.prefix[k]
        return self.block[(k - len(self.prefix)) % len(self.block)]

    def prepend(self, w: str) -> "Coding":
        return Coding(w + self.prefix, self.block)

    def shift(self, n: int = 1) -> "Coding":
        """Drop the first ``n`` letters."""
        if n <= len(self.prefix):
            return Coding(self.prefix[n:], self.block)
        k = (n - len(self.prefix)) % len(self.block)
        return Coding("", self.block[k:] + self.block[:k])


def _lex(a: Coding, b: Coding) -> int:
    n = max(len(a.prefix), len(b.prefix)) + lcm(len(a.block), len(b.block))
    ha, hb = a.head(n), b.head(n)
    if ha == hb:
        return EQUAL
    return LESS if ha < hb else GREATER


def _as_coding(x) -> tuple[Coding, bool]:
    if isinstance(x, Coding):
        return x, False
    if isinstance(x, str):
        return Coding(x + "1", "0"), True
    raise TypeError(f"expected a word or a Coding, got {type(x).__name__}")


def compare(x, y) -> int:
    """Order of two words or codings: -1 (less), 0 (equal) or 1 (greater).

    A word ``w`` sits strictly between ``w01^inf`` and ``w10^inf``; a word
    and a coding are never equal.
    """
    cx, wx = _as_coding(x)
    cy, wy = _as_coding(y)
    c = _lex(cx, cy)
    if wx == wy:
        return c
    # exactly one side is a word, represented by the right end of its gap;
    # a coding equal to that end lies to the right of the word
    if c == EQUAL:
        return LESS if wx else GREATER
    return c


def word_key(w: str, max_len: int) -> str:
    """Sort key for words of length at most ``max_len`` under the gap order."""
    return (w + "1").ljust(max_len + 1, "0")


def enumerate_words(max_len: int) -> list[str]:
    """All words of length at most ``max_len``, sorted left to right."""
    if max_len < 0:
        raise DomainError("max_len must be non-negative")
    if max_len > MAX_ENUM_LEN:
        raise CapacityError(f"enumerating words beyond length {MAX_ENUM_LEN} is not supported")
    words = [""]
    level = [""]
    for _ in range(max_len):
        level = [w + c for w in level for c in "01"]
        words.extend(level)
    return sorted(words, key=lambda w: word_key(w, max_len))


def boundary_codings(w: str) -> tuple[Coding, Coding]:
    """Codings of the left and right ends of the gap of ``w``."""
    return Coding(w + "0", "1"), Coding(w + "1", "0")


sort_key = cmp_to_key(compare)
