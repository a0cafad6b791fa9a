"""Probabilistic top-down parsing over compiled rule sets.

Every leaf of a partial derivation carries a position index per entry: a
binary string locating that constituent in the derived tree, where ``0`` is
a left branch and ``1`` a right branch.  The pointer names the next position
to work on.  Leaves are expanded or scanned in increasing position order, so
words come out left to right even though the derivation tree is built top
down.
"""
from __future__ import annotations

import heapq
import itertools
import math
import random
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Sequence

from .lcfrs import SPLITTING_KINDS, START, Category, Rule, RuleKind, RuleSet
from .probability import Provider

EXHAUSTED = None  # pointer value once every position has been scanned
DEFAULT_MAX_STEPS = 10**6


class ParserInvariantError(AssertionError):
    """The frontier broke one of the pointer-soundness guarantees."""


class DerivationError(ValueError):
    """A rule sequence cannot be replayed under the pointer discipline."""


# --- position indices -----------------------------------------------------

def successor(pos: str) -> str | None:
    """Next position in a left-to-right sweep: ``a0(1*)`` becomes ``a1``."""
    if pos is EXHAUSTED:
        raise ValueError("EXHAUSTED has no successor")
    stripped = pos.rstrip("1")
    if not stripped:
        return EXHAUSTED
    return stripped[:-1] + "1"


def corresponds(pointer: str, pos: str) -> bool:
    """True iff `pos` is `pointer` followed by zero or more ``0``."""
    return pos.startswith(pointer) and not pos[len(pointer):].strip("0")


def format_position(pos: str | None) -> str:
    if pos is EXHAUSTED:
        return "-1"
    return pos or "ε"


# --- hypotheses -----------------------------------------------------------

class Leaf(NamedTuple):
    """An unexpanded node: its category, one position per entry, and the
    ids of the rules above it (nearest first)."""

    category: Category
    positions: tuple[str, ...]
    path: tuple[int, ...]

    def __str__(self) -> str:
        if self.category.is_start:
            return f"{format_position(self.positions[0])}/start"
        inner = ", ".join(
            f"{format_position(p)}/{e}" for p, e in zip(self.positions, self.category.entries)
        )
        return f"[{inner}]"


@dataclass(frozen=True)
class Hypothesis:
    leaves: tuple[Leaf, ...]
    pointer: str | None
    logp: float
    input_pos: int
    history: tuple[int, ...]
    scanned: tuple[tuple[str, str], ...] = ()

    @property
    def prob(self) -> float:
        return math.exp(self.logp)

    @property
    def words(self) -> list[str]:
        return [w for _, w in sorted(self.scanned) if w]

    @property
    def complete(self) -> bool:
        return self.pointer is EXHAUSTED


def axiom() -> Hypothesis:
    return Hypothesis((Leaf(START, ("",), ()),), "", 0.0, 0, ())


def find_leaf(h: Hypothesis) -> tuple[int, int, str]:
    """Locate the entry whose position corresponds to the pointer.

    Returns ``(leaf index, entry index, position)``; the caller moves the
    pointer to that position.
    """
    if h.pointer is EXHAUSTED:
        raise ValueError("pointer is exhausted")
    found = [
        (i, j, pos)
        for i, leaf in enumerate(h.leaves)
        for j, pos in enumerate(leaf.positions)
        if corresponds(h.pointer, pos)
    ]
    if len(found) != 1:
        raise ParserInvariantError(
            f"{len(found)} frontier entries correspond to pointer {format_position(h.pointer)}"
        )
    return found[0]


def _apply(h: Hypothesis, where: tuple[int, int, str], rule: Rule, logp: float,
           consumes: bool = False) -> Hypothesis:
    li, ei, pos = where
    leaf = h.leaves[li]
    if leaf.category != rule.lhs:
        raise DerivationError(f"rule R{rule.id} does not rewrite {leaf.category}")
    rest = h.leaves[:li] + h.leaves[li + 1:]
    if rule.kind is RuleKind.LEXICALIZE:
        return Hypothesis(
            rest,
            successor(pos),
            h.logp + logp,
            h.input_pos + (1 if consumes else 0),
            h.history + (rule.id,),
            h.scanned + ((pos, rule.item.phon),),
        )
    path = (rule.id,) + leaf.path
    children = tuple(
        Leaf(cat, tuple(leaf.positions[src] + suffix for src, suffix in recipe), path)
        for cat, recipe in zip(rule.rhs, rule.routing)
    )
    pointer = pos + "0" if ei == 0 and rule.kind in SPLITTING_KINDS else pos
    return Hypothesis(rest + children, pointer, h.logp + logp, h.input_pos,
                      h.history + (rule.id,), h.scanned)


def expand(h: Hypothesis, rule: Rule, provider: Provider) -> Hypothesis:
    where = find_leaf(h)
    leaf = h.leaves[where[0]]
    if leaf.category.is_simple:
        raise DerivationError(f"{leaf.category} is simple and must be scanned")
    return _apply(h, where, rule, provider.log_prob(rule, leaf.path))


def scan(h: Hypothesis, rs: RuleSet, provider: Provider, words: Sequence[str]) -> list[Hypothesis]:
    where = find_leaf(h)
    leaf = h.leaves[where[0]]
    if not leaf.category.is_simple:
        raise DerivationError(f"{leaf.category} is not simple")
    out = []
    for rule in rs.rules_for(leaf.category):
        phon = rule.item.phon
        if phon:
            if h.input_pos >= len(words) or words[h.input_pos] != phon:
                continue
        logp = provider.log_prob(rule, leaf.path)
        if logp == -math.inf:
            continue
        out.append(_apply(h, where, rule, logp, consumes=bool(phon)))
    return out


def successors(h: Hypothesis, rs: RuleSet, provider: Provider,
               words: Sequence[str]) -> list[Hypothesis]:
    where = find_leaf(h)
    leaf = h.leaves[where[0]]
    if leaf.category.is_simple:
        return scan(h, rs, provider, words)
    out = []
    for rule in rs.rules_for(leaf.category):
        logp = provider.log_prob(rule, leaf.path)
        if logp != -math.inf:
            out.append(_apply(h, where, rule, logp))
    return out


# --- invariants -----------------------------------------------------------

def check_pointer_soundness(h: Hypothesis) -> None:
    """Assert the frontier is a cut, scanned positions precede unscanned
    ones, and the pointer corresponds to the smallest unscanned position."""
    scanned = [p for p, _ in h.scanned]
    pending = [p for leaf in h.leaves for p in leaf.positions]
    every = scanned + pending
    if len(set(every)) != len(every):
        raise ParserInvariantError(f"duplicate positions in {every}")
    ordered = sorted(every)
    for a, b in zip(ordered, ordered[1:]):
        if b.startswith(a):
            raise ParserInvariantError(f"{a!r} dominates {b!r}")
    depth = max(map(len, every))
    if sum(2 ** (depth - len(p)) for p in every) != 2 ** depth:
        raise ParserInvariantError(f"positions {every} do not cover the tree")
    if scanned != sorted(scanned):
        raise ParserInvariantError(f"scan order {scanned} is not left to right")
    if scanned and pending and max(scanned) > min(pending):
        raise ParserInvariantError("scanned positions are not a prefix of the cut")
    if not pending:
        if h.pointer is not EXHAUSTED:
            raise ParserInvariantError("pointer should be exhausted")
    elif h.pointer is EXHAUSTED or not corresponds(h.pointer, min(pending)):
        raise ParserInvariantError(
            f"pointer {format_position(h.pointer)} does not point to {min(pending)!r}"
        )


# --- parsing --------------------------------------------------------------

@dataclass(frozen=True)
class BeamConfig:
    """Prune hypotheses below ``rel_factor`` times the best one; optionally
    cap the queue length.  ``rel_factor=0`` disables pruning."""

    rel_factor: float = 0.0
    max_queue: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.rel_factor <= 1.0:
            raise ValueError("rel_factor must lie in [0, 1]")
        if self.max_queue is not None and self.max_queue < 1:
            raise ValueError("max_queue must be positive")


BEAM_OFF = BeamConfig()

SUCCESS = "success"
UNGRAMMATICAL = "ungrammatical"
ABORTED = "aborted"


class ParseOutcome(NamedTuple):
    derivation: tuple[int, ...]
    logp: float
    words: tuple[str, ...]

    @property
    def prob(self) -> float:
        return math.exp(self.logp)


@dataclass
class ParseResult:
    status: str
    results: list[ParseOutcome]
    steps: int
    trace: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return bool(self.results)

    @property
    def best(self) -> ParseOutcome | None:
        return self.results[0] if self.results else None


def _summary(h: Hypothesis) -> str:
    return " ".join(str(leaf) for leaf in sorted(h.leaves, key=lambda l: min(l.positions)))


def parse(words: Sequence[str], rs: RuleSet, provider: Provider,
          beam: BeamConfig = BEAM_OFF, k_best: int | None = 1,
          max_steps: int = DEFAULT_MAX_STEPS, check_invariants: bool = False,
          trace: bool = False) -> ParseResult:
    """Best-first top-down parse of `words`.

    Collects up to `k_best` complete derivations (all of them when None) in
    non-increasing probability order.  Among equally probable hypotheses the
    older one is expanded first.
    """
    words = tuple(words)
    n = len(words)
    counter = itertools.count()
    start = axiom()
    heap = [(-start.logp, next(counter), start)]
    results: list[ParseOutcome] = []
    log: list[str] = []
    steps = 0
    log_rel = math.log(beam.rel_factor) if beam.rel_factor > 0 else -math.inf

    while heap:
        if steps >= max_steps:
            return ParseResult(ABORTED, results, steps, log)
        _, _, h = heapq.heappop(heap)
        steps += 1
        if check_invariants:
            check_pointer_soundness(h)
        if h.pointer is EXHAUSTED:
            if h.input_pos == n:
                results.append(ParseOutcome(h.history, h.logp, tuple(h.words)))
                if trace:
                    log.append(f"{steps} accept -1 {h.prob:.6g} {_summary(h)}")
                if k_best is not None and len(results) >= k_best:
                    break
            elif trace:
                log.append(f"{steps} reject -1 {h.prob:.6g} {_summary(h)}")
            continue
        li, ei, pos = find_leaf(h)
        h = replace(h, pointer=pos)
        action = "scan" if h.leaves[li].category.is_simple else "expand"
        new = successors(h, rs, provider, words)
        if trace:
            log.append(f"{steps} {action} {format_position(pos)} {h.prob:.6g} {_summary(h)}")
        if not new:
            continue
        top = max(h2.logp for h2 in new)
        if heap:
            top = max(top, -heap[0][0])
        threshold = top + log_rel
        for h2 in new:
            # Older entries already cleared a threshold at least this high.
            if h2.logp >= threshold:
                if check_invariants:
                    check_pointer_soundness(h2)
                heapq.heappush(heap, (-h2.logp, next(counter), h2))
        if beam.max_queue is not None and len(heap) > beam.max_queue:
            heap = heapq.nsmallest(beam.max_queue, heap)
    return ParseResult(SUCCESS if results else UNGRAMMATICAL, results, steps, log)


# --- replay ---------------------------------------------------------------

class _Unit:
    def log_prob(self, rule, context):
        return 0.0


def replay_steps(derivation: Sequence[int], rs: RuleSet,
                 provider: Provider | None = None) -> Iterator[tuple[Hypothesis, Leaf, Rule]]:
    """Replay `derivation`, yielding (state before, leaf rewritten, rule) per step."""
    provider = provider or _Unit()
    h = axiom()
    for rid in derivation:
        if h.pointer is EXHAUSTED:
            raise DerivationError("derivation continues after the last scan")
        try:
            rule = rs[rid]
        except KeyError:
            raise DerivationError(f"unknown rule id {rid}") from None
        li, ei, pos = find_leaf(h)
        h = replace(h, pointer=pos)
        leaf = h.leaves[li]
        yield h, leaf, rule
        consumes = rule.kind is RuleKind.LEXICALIZE and bool(rule.item.phon)
        h = _apply(h, (li, ei, pos), rule, provider.log_prob(rule, leaf.path), consumes)
    yield h, None, None


def replay(derivation: Sequence[int], rs: RuleSet, provider: Provider | None = None) -> Hypothesis:
    """Rebuild the hypothesis a rule sequence leads to (partial sequences allowed)."""
    final = None
    for final, _, _ in replay_steps(derivation, rs, provider):
        pass
    return final


def derivation_yield(derivation: Sequence[int], rs: RuleSet) -> list[str]:
    h = replay(derivation, rs)
    if not h.complete:
        raise DerivationError("derivation is incomplete")
    return h.words


def rule_context(history: Sequence[int] | Hypothesis, rs: RuleSet) -> tuple[int, ...]:
    """Rule ids from the node about to be expanded up to the root, nearest first."""
    if isinstance(history, Hypothesis):
        history = history.history
    h = replay(history, rs)
    if h.complete:
        raise DerivationError("derivation is complete; nothing left to expand")
    li, _, _ = find_leaf(h)
    return h.leaves[li].path


# --- generation -----------------------------------------------------------

class SampleOverflow(RuntimeError):
    """Sampling ran past its step budget."""


class Sample(NamedTuple):
    derivation: tuple[int, ...]
    words: tuple[str, ...]
    logp: float


def sample(rs: RuleSet, provider: Provider, rng: int | random.Random | None = None,
           max_steps: int = 10_000) -> Sample:
    """Draw one derivation by running the parser loop generatively."""
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    h = axiom()
    for _ in range(max_steps):
        if h.pointer is EXHAUSTED:
            return Sample(h.history, tuple(w for _, w in h.scanned if w), h.logp)
        li, ei, pos = find_leaf(h)
        h = replace(h, pointer=pos)
        leaf = h.leaves[li]
        options = [(r, provider.log_prob(r, leaf.path)) for r in rs.rules_for(leaf.category)]
        options = [(r, lp) for r, lp in options if lp > -math.inf]
        if not options:
            raise DerivationError(f"no rule with positive probability rewrites {leaf.category}")
        weights = [math.exp(lp) for _, lp in options]
        rule, lp = rng.choices(options, weights=weights)[0]
        consumes = rule.kind is RuleKind.LEXICALIZE and bool(rule.item.phon)
        h = _apply(h, (li, ei, pos), rule, lp, consumes)
    raise SampleOverflow(f"no complete derivation within {max_steps} steps")


# --- text formats ---------------------------------------------------------

def parse_derivation(text: str, rs: RuleSet) -> tuple[int, ...]:
    """Read whitespace-separated ``R<id>`` tokens or kind aliases (``S2 Mv1``)."""
    try:
        return tuple(rs.resolve(tok) for tok in text.split())
    except KeyError as exc:
        raise DerivationError(str(exc.args[0])) from None


def format_derivation(derivation: Sequence[int], rs: RuleSet | None = None,
                      aliases: bool = False) -> str:
    if aliases:
        return " ".join(rs.aliases[rid] for rid in derivation)
    return " ".join(f"R{rid}" for rid in derivation)


def derivation_tree(derivation: Sequence[int], rs: RuleSet) -> str:
    """Indented text rendering of the derivation tree."""
    children: dict[int, list[int]] = {}
    node_of_leaf: dict[tuple, int] = {}
    labels: list[str] = []
    for h, leaf, rule in replay_steps(derivation, rs):
        if rule is None:
            break
        parent = node_of_leaf.get((leaf.path, leaf.positions, leaf.category), None)
        me = len(labels)
        if rule.kind is RuleKind.LEXICALIZE:
            phon = rule.item.phon or "ε"
            labels.append(f"{phon} :: {' '.join(map(str, rule.item.features))}  (R{rule.id})")
        else:
            labels.append(f"{rule.lhs}  (R{rule.id} {rule.kind.value})")
        children.setdefault(me, [])
        if parent is not None:
            children[parent].append(me)
        path = (rule.id,) + leaf.path
        for cat, recipe in zip(rule.rhs, rule.routing):
            positions = tuple(leaf.positions[src] + suffix for src, suffix in recipe)
            node_of_leaf[(path, positions, cat)] = me
    out: list[str] = []

    def walk(node: int, depth: int) -> None:
        out.append("  " * depth + labels[node])
        for child in children.get(node, ()):
            walk(child, depth + 1)

    if labels:
        walk(0, 0)
    return "\n".join(out) + ("\n" if out else "")
