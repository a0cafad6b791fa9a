"""Minimalist grammar lexicons and their text format.

A grammar file holds one lexical item per line::

    # comment
    !start c
    which :: =n d -wh
    :: =v +wh c          # empty phonology
    eps :: =a +m c       # same thing, spelled out

Feature tokens are ``=x`` (selector), ``+f`` (licensor), ``-f`` (licensee)
and bare ``x`` (category).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple

SELECTOR = "selector"
LICENSOR = "licensor"
LICENSEE = "licensee"
CATEGORY = "category"

_PREFIX = {SELECTOR: "=", LICENSOR: "+", LICENSEE: "-", CATEGORY: ""}
_KIND_OF_PREFIX = {"=": SELECTOR, "+": LICENSOR, "-": LICENSEE}
_RESERVED = ("=", "+", "-", "·", "::")
EPSILON_TOKEN = "eps"


class GrammarError(ValueError):
    """Raised for malformed grammar files or ill-formed lexical items."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Feature(NamedTuple):
    kind: str
    name: str

    def __str__(self) -> str:
        return _PREFIX[self.kind] + self.name

    @classmethod
    def parse(cls, token: str) -> "Feature":
        kind = _KIND_OF_PREFIX.get(token[:1], CATEGORY)
        name = token if kind == CATEGORY else token[1:]
        check_name(name)
        return cls(kind, name)


def check_name(name: str) -> None:
    if not name:
        raise GrammarError("empty feature name")
    if any(ch.isspace() for ch in name) or any(mark in name for mark in _RESERVED):
        raise GrammarError(f"invalid feature name {name!r}")


def check_feature_string(features: tuple[Feature, ...]) -> None:
    """Enforce ``(Sel (Sel|Licensor)*)? Cat Licensee*``."""
    if not features:
        raise GrammarError("empty feature string")
    cats = [i for i, f in enumerate(features) if f.kind == CATEGORY]
    shown = " ".join(map(str, features))
    if len(cats) != 1:
        raise GrammarError(f"{shown!r} must contain exactly one category feature")
    k = cats[0]
    head, tail = features[:k], features[k + 1:]
    if head and head[0].kind != SELECTOR:
        raise GrammarError(f"{shown!r} must start with a selector or its category")
    if any(f.kind not in (SELECTOR, LICENSOR) for f in head):
        raise GrammarError(f"{shown!r}: only selectors and licensors may precede the category")
    if any(f.kind != LICENSEE for f in tail):
        raise GrammarError(f"{shown!r}: only licensees may follow the category")


def format_features(features: Iterable[Feature]) -> str:
    return " ".join(map(str, features))


@dataclass(frozen=True)
class LexicalItem:
    phon: str
    features: tuple[Feature, ...]

    def __post_init__(self):
        if any(ch.isspace() for ch in self.phon) or "::" in self.phon:
            raise GrammarError(f"invalid phonetic form {self.phon!r}")
        check_feature_string(self.features)

    @classmethod
    def parse(cls, text: str) -> "LexicalItem":
        if "::" not in text:
            raise GrammarError(f"missing '::' in {text!r}")
        phon, _, feats = text.partition("::")
        phon = phon.strip()
        if phon == EPSILON_TOKEN:
            phon = ""
        tokens = feats.split()
        if not tokens:
            raise GrammarError(f"no features in {text!r}")
        return cls(phon, tuple(Feature.parse(t) for t in tokens))

    @property
    def category(self) -> str:
        return next(f.name for f in self.features if f.kind == CATEGORY)

    @property
    def last(self) -> Feature:
        return self.features[-1]

    def __str__(self) -> str:
        phon = self.phon or "ε"
        return f"{phon} :: {format_features(self.features)}"


@dataclass(frozen=True)
class Lexicon:
    items: tuple[LexicalItem, ...]
    distinguished: str = "c"

    def __post_init__(self):
        check_name(self.distinguished)
        seen = set()
        for item in self.items:
            if item in seen:
                raise GrammarError(f"duplicate lexical item {item}")
            seen.add(item)
        if self.items and not any(item.category == self.distinguished for item in self.items):
            warnings.warn(
                f"no lexical item has category {self.distinguished!r}; the language is empty",
                stacklevel=3,
            )

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def total_feature_length(self) -> int:
        return sum(len(item.features) for item in self.items)

    def ending_in(self, feature: Feature) -> list[LexicalItem]:
        """Items whose feature string ends with `feature`, in lexicon order."""
        return [item for item in self.items if item.last == feature]


def parse_lexicon(text: str) -> Lexicon:
    items = []
    distinguished = "c"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("!"):
            directive, *args = line[1:].split()
            if directive != "start" or len(args) != 1:
                raise GrammarError(f"unknown directive {line!r}", lineno)
            try:
                check_name(args[0])
            except GrammarError as exc:
                raise GrammarError(str(exc), lineno) from None
            distinguished = args[0]
            continue
        try:
            items.append(LexicalItem.parse(line))
        except GrammarError as exc:
            raise GrammarError(f"{exc} (item {line!r})", lineno) from None
    try:
        return Lexicon(tuple(items), distinguished)
    except GrammarError as exc:
        raise GrammarError(str(exc)) from None


def format_lexicon(lex: Lexicon) -> str:
    lines = []
    if lex.distinguished != "c":
        lines.append(f"!start {lex.distinguished}")
    for item in lex.items:
        prefix = f"{item.phon} " if item.phon else ""
        lines.append(f"{prefix}:: {format_features(item.features)}")
    return "".join(line + "\n" for line in lines)
