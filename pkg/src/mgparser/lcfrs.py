"""Compile a minimalist lexicon into top-down LCFRS rules.

Categories are sequences of dotted feature strings.  Entry 0 is the head
chain; the remaining entries are movers, kept in a canonical order so that
categories can be hashed and compared.  Rules are discovered breadth-first
from the ``start`` axiom, and the closure is then trimmed to the categories
that occur in at least one complete derivation.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

from .grammar import (
    CATEGORY,
    LICENSEE,
    LICENSOR,
    SELECTOR,
    Feature,
    LexicalItem,
    Lexicon,
    format_features,
)


class DottedString(NamedTuple):
    features: tuple[Feature, ...]
    dot: int

    @property
    def consumed(self) -> tuple[Feature, ...]:
        return self.features[: self.dot]

    @property
    def pending(self) -> tuple[Feature, ...]:
        return self.features[self.dot:]

    @property
    def last_consumed(self) -> Feature | None:
        return self.features[self.dot - 1] if self.dot else None

    @property
    def next(self) -> Feature | None:
        return self.features[self.dot] if self.dot < len(self.features) else None

    def shift(self, step: int) -> "DottedString":
        return DottedString(self.features, self.dot + step)

    def __str__(self) -> str:
        parts = [format_features(self.consumed), ".", format_features(self.pending)]
        return " ".join(p for p in parts if p)


def _mover_key(entry: DottedString):
    return (entry.pending, entry.consumed)


@dataclass(frozen=True)
class Category:
    """An LCFRS nonterminal.  The empty entry tuple is the ``start`` axiom."""

    entries: tuple[DottedString, ...]

    @classmethod
    def make(cls, head: DottedString, movers: Sequence[DottedString] = ()) -> "Category":
        return cls((head, *sorted(movers, key=_mover_key)))

    @property
    def is_start(self) -> bool:
        return not self.entries

    @property
    def head(self) -> DottedString:
        return self.entries[0]

    @property
    def movers(self) -> tuple[DottedString, ...]:
        return self.entries[1:]

    @property
    def is_simple(self) -> bool:
        return len(self.entries) == 1 and self.entries[0].dot == 0

    def feature_length(self) -> int:
        return sum(len(e.features) for e in self.entries)

    def __str__(self) -> str:
        if self.is_start:
            return "start"
        return "[" + ", ".join(map(str, self.entries)) + "]"


START = Category(())


def check_smc(cat: Category) -> bool:
    """Shortest Movement Constraint: no two movers await the same licensee."""
    seen = set()
    for mover in cat.movers:
        nxt = mover.next
        if nxt is None or nxt.kind != LICENSEE:
            continue
        if nxt.name in seen:
            return False
        seen.add(nxt.name)
    return True


def is_valid(cat: Category) -> bool:
    if cat.is_start:
        return True
    if cat.head.dot == 0 and cat.movers:
        return False
    if any(not m.pending for m in cat.movers):
        return False
    return check_smc(cat)


class RuleKind(enum.Enum):
    START = "Start"
    UNMERGE1 = "Unmerge1"
    UNMERGE2 = "Unmerge2"
    UNMERGE3_SIMPLE = "Unmerge3Simple"
    UNMERGE3_COMPLEX = "Unmerge3Complex"
    UNMOVE1 = "Unmove1"
    UNMOVE2 = "Unmove2"
    LEXICALIZE = "Lexicalize"

    @property
    def alias_prefix(self) -> str:
        if self is RuleKind.START:
            return "S"
        if self is RuleKind.LEXICALIZE:
            return "L"
        if self in (RuleKind.UNMOVE1, RuleKind.UNMOVE2):
            return "Mv"
        return "Mg"


# Kinds that split the head's position index in two; the parser's pointer
# descends to the new left daughter when it pointed at the head.
SPLITTING_KINDS = frozenset({RuleKind.UNMERGE1, RuleKind.UNMERGE2, RuleKind.UNMOVE1})

# A routing recipe places one rhs entry: (lhs entry index, position suffix).
Recipe = tuple[tuple[int, str], ...]


@dataclass(frozen=True)
class Rule:
    id: int
    kind: RuleKind
    lhs: Category
    rhs: tuple[Category, ...] = ()
    item: LexicalItem | None = None
    routing: tuple[Recipe, ...] = ()

    def __str__(self) -> str:
        return format_rule(self)


def _rhs_text(rule: Rule) -> str:
    if rule.kind is RuleKind.LEXICALIZE:
        phon = rule.item.phon or "ε"
        return f"{phon} :: {format_features(rule.item.features)}"
    return " ".join(map(str, rule.rhs))


def format_rule(rule: Rule) -> str:
    return f"R{rule.id}\t{rule.lhs} -> {_rhs_text(rule)}\t{rule.kind.value}"


@dataclass
class RuleSet:
    lexicon: Lexicon
    rules: tuple[Rule, ...]
    categories: tuple[Category, ...]
    index: dict[Category, tuple[int, ...]] = field(repr=False)

    def __post_init__(self):
        self._by_id = {r.id: r for r in self.rules}
        self.aliases = {}
        counters: dict[str, int] = {}
        for rule in self.rules:
            prefix = rule.kind.alias_prefix
            counters[prefix] = counters.get(prefix, 0) + 1
            self.aliases[rule.id] = f"{prefix}{counters[prefix]}"
        self._by_alias = {alias: rid for rid, alias in self.aliases.items()}

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __getitem__(self, rule_id: int) -> Rule:
        return self._by_id[rule_id]

    def rules_for(self, cat: Category) -> list[Rule]:
        return [self._by_id[i] for i in self.index.get(cat, ())]

    def resolve(self, token: str) -> int:
        """Map ``R12`` or a kind alias such as ``Mg3`` to a rule id."""
        if token in self._by_alias:
            return self._by_alias[token]
        if token.startswith("R") and token[1:].isdigit() and int(token[1:]) in self._by_id:
            return int(token[1:])
        raise KeyError(f"unknown rule {token!r}")

    def format_table(self) -> str:
        return "".join(format_rule(r) + "\n" for r in self.rules)


class ClosureError(RuntimeError):
    """A generated category broke the finiteness bound (a compiler bug)."""


# --- rule schemes ---------------------------------------------------------

class _Draft(NamedTuple):
    kind: RuleKind
    lhs: Category
    rhs: tuple[Category, ...]
    item: LexicalItem | None
    routing: tuple[Recipe, ...]


def _child(head: tuple[DottedString, tuple[int, str]],
           movers: Sequence[tuple[DottedString, tuple[int, str]]]) -> tuple[Category, Recipe]:
    ordered = sorted(movers, key=lambda m: _mover_key(m[0]))
    cat = Category((head[0], *(m[0] for m in ordered)))
    return cat, (head[1], *(m[1] for m in ordered))


def _draft(kind, lhs, children, item=None) -> _Draft | None:
    cats = tuple(c for c, _ in children)
    if not all(is_valid(c) for c in cats):
        return None
    return _Draft(kind, lhs, cats, item, tuple(r for _, r in children))


def _splits(movers):
    """Every order-preserving split of `movers` into (U, V)."""
    for mask in range(2 ** len(movers)):
        left = [m for i, m in enumerate(movers) if not mask >> i & 1]
        right = [m for i, m in enumerate(movers) if mask >> i & 1]
        yield left, right


def start_rules(lex: Lexicon) -> list[Rule]:
    return [
        Rule(0, d.kind, d.lhs, d.rhs, d.item, d.routing)
        for d in _start_drafts(lex)
    ]


def _start_drafts(lex: Lexicon) -> list[_Draft]:
    drafts, seen = [], set()
    goal = Feature(CATEGORY, lex.distinguished)
    for item in lex.ending_in(goal):
        head = DottedString(item.features, len(item.features) - 1)
        d = _draft(RuleKind.START, START, [_child((head, (0, "")), [])])
        if d and d.rhs not in seen:
            seen.add(d.rhs)
            drafts.append(d)
    return drafts


def expand_category(cat: Category, lex: Lexicon) -> list[Rule]:
    return [
        Rule(0, d.kind, d.lhs, d.rhs, d.item, d.routing)
        for d in _expand_drafts(cat, lex)
    ]


def _expand_drafts(cat: Category, lex: Lexicon) -> list[_Draft]:
    if cat.is_start:
        return _start_drafts(lex)
    if cat.is_simple:
        return [
            _Draft(RuleKind.LEXICALIZE, cat, (), item, ())
            for item in lex.items
            if item.features == cat.head.features
        ]
    head = cat.head
    feature = head.last_consumed
    movers = [(m, (i, "")) for i, m in enumerate(cat.movers, start=1)]
    out: list[_Draft | None] = []
    if feature is not None and feature.kind == SELECTOR:
        out.extend(_unmerge(cat, feature, movers, lex))
    elif feature is not None and feature.kind == LICENSOR:
        out.extend(_unmove(cat, feature, movers, lex))
    drafts, seen = [], set()
    for d in out:
        if d is None or (d.kind, d.rhs) in seen:
            continue
        seen.add((d.kind, d.rhs))
        drafts.append(d)
    return drafts


def _unmerge(cat, sel, movers, lex):
    head = cat.head
    selector = head.shift(-1)
    simple = selector.dot == 0
    x = Feature(CATEGORY, sel.name)
    selected_items = lex.ending_in(x)
    carriers = [(i, m) for i, m in enumerate(movers) if m[0].last_consumed == x]
    if simple:
        for item in selected_items:
            selected = DottedString(item.features, len(item.features) - 1)
            yield _draft(RuleKind.UNMERGE1, cat, [
                _child((selector, (0, "0")), []),
                _child((selected, (0, "1")), movers),
            ])
        for i, (mover, recipe) in carriers:
            rest = movers[:i] + movers[i + 1:]
            yield _draft(RuleKind.UNMERGE3_SIMPLE, cat, [
                _child((selector, (0, "")), []),
                _child((mover.shift(-1), recipe), rest),
            ])
    else:
        for item in selected_items:
            selected = DottedString(item.features, len(item.features) - 1)
            for u, v in _splits(movers):
                yield _draft(RuleKind.UNMERGE2, cat, [
                    _child((selector, (0, "1")), u),
                    _child((selected, (0, "0")), v),
                ])
        for i, (mover, recipe) in carriers:
            rest = movers[:i] + movers[i + 1:]
            for u, v in _splits(rest):
                yield _draft(RuleKind.UNMERGE3_COMPLEX, cat, [
                    _child((selector, (0, "")), u),
                    _child((mover.shift(-1), recipe), v),
                ])


def _unmove(cat, lic, movers, lex):
    head = cat.head.shift(-1)
    licensee = Feature(LICENSEE, lic.name)
    landed = [(i, m) for i, m in enumerate(movers) if m[0].last_consumed == licensee]
    if landed:
        for i, (mover, recipe) in landed:
            rest = movers[:i] + movers[i + 1:]
            yield _draft(RuleKind.UNMOVE2, cat, [
                _child((head, (0, "")), [(mover.shift(-1), recipe), *rest]),
            ])
        return
    for item in lex.ending_in(licensee):
        new = DottedString(item.features, len(item.features) - 1)
        yield _draft(RuleKind.UNMOVE1, cat, [
            _child((head, (0, "1")), [(new, (0, "0")), *movers]),
        ])


# --- closure --------------------------------------------------------------

def close(lex: Lexicon) -> RuleSet:
    """Breadth-first closure of ``start`` under the rule schemes.

    Categories that cannot be rewritten down to lexical items are dropped
    together with every rule mentioning them, and so are categories no
    longer reachable from ``start`` afterwards.
    """
    bound = lex.total_feature_length()
    order = [START]
    seen = {START}
    drafts: list[_Draft] = []
    queue = deque([START])
    while queue:
        cat = queue.popleft()
        for d in _expand_drafts(cat, lex):
            drafts.append(d)
            for child in d.rhs:
                if child.feature_length() > bound:
                    raise ClosureError(f"category {child} exceeds the length bound {bound}")
                if child not in seen:
                    seen.add(child)
                    order.append(child)
                    queue.append(child)

    productive: set[Category] = set()
    changed = True
    while changed:
        changed = False
        for d in drafts:
            if d.lhs not in productive and all(c in productive for c in d.rhs):
                productive.add(d.lhs)
                changed = True
    kept = [d for d in drafts if d.lhs in productive and all(c in productive for c in d.rhs)]

    reachable = {START} if START in productive else set()
    by_lhs: dict[Category, list[_Draft]] = {}
    for d in kept:
        by_lhs.setdefault(d.lhs, []).append(d)
    frontier = list(reachable)
    while frontier:
        cat = frontier.pop()
        for d in by_lhs.get(cat, ()):
            for child in d.rhs:
                if child not in reachable:
                    reachable.add(child)
                    frontier.append(child)

    rules = []
    index: dict[Category, list[int]] = {}
    for d in kept:
        if d.lhs not in reachable:
            continue
        rule = Rule(len(rules) + 1, d.kind, d.lhs, d.rhs, d.item, d.routing)
        rules.append(rule)
        index.setdefault(d.lhs, []).append(rule.id)
    categories = tuple(c for c in order if c in reachable)
    return RuleSet(lex, tuple(rules), categories, {k: tuple(v) for k, v in index.items()})


def read_rule_table(text: str, lex: Lexicon) -> RuleSet:
    """Load a rule table written by :meth:`RuleSet.format_table`.

    The table is checked line by line against a fresh compilation of `lex`,
    so rule ids in the file are guaranteed to mean the same rules.
    """
    rs = close(lex)
    expected = rs.format_table().splitlines()
    got = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if len(got) != len(expected):
        raise ValueError(f"rule table has {len(got)} rules, grammar compiles to {len(expected)}")
    for lineno, (a, b) in enumerate(zip(got, expected), start=1):
        if a.rstrip() != b:
            raise ValueError(f"rule table line {lineno} does not match the grammar: {a!r}")
    return rs
