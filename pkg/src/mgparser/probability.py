"""Conditional rule probabilities and the provider interface used by the parser."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import networkx as nx

from .lcfrs import Category, Rule, RuleSet

NORMALIZATION_TOL = 1e-9
UNIT_TOL = 1e-12


class ProbabilityError(ValueError):
    pass


class Provider(Protocol):
    """Anything that scores a rule given its rule-path context."""

    def log_prob(self, rule: Rule, context: Sequence[int]) -> float: ...


def _log(p: float) -> float:
    return math.log(p) if p > 0 else -math.inf


@dataclass(frozen=True)
class ProbTable:
    """Static rule probabilities, conditioned on the left-hand category only."""

    rules: RuleSet = field(repr=False)
    probs: dict[int, float]

    def __post_init__(self):
        object.__setattr__(self, "_logs", {rid: _log(p) for rid, p in self.probs.items()})

    def __getitem__(self, rule_id: int) -> float:
        return self.probs[rule_id]

    def prob(self, rule: Rule, context: Sequence[int] = ()) -> float:
        return self.probs[rule.id]

    def log_prob(self, rule: Rule, context: Sequence[int] = ()) -> float:
        return self._logs[rule.id]

    def format(self) -> str:
        return "".join(f"R{rid} {self.probs[rid]!r}\n" for rid in sorted(self.probs))


def uniform_table(rs: RuleSet) -> ProbTable:
    probs = {}
    for ids in rs.index.values():
        for rid in ids:
            probs[rid] = 1.0 / len(ids)
    return ProbTable(rs, probs)


def load_table(rs: RuleSet, text: str) -> ProbTable:
    """Read ``R<id> <prob>`` lines; unlisted rules share their group's residual mass.

    Kind aliases (``S1``, ``Mg3``...) are accepted in place of ``R<id>``.
    """
    given: dict[int, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ProbabilityError(f"line {lineno}: expected '<rule> <probability>'")
        try:
            rid = rs.resolve(parts[0])
        except KeyError:
            raise ProbabilityError(f"line {lineno}: unknown rule id {parts[0]!r}") from None
        try:
            p = float(parts[1])
        except ValueError:
            raise ProbabilityError(f"line {lineno}: bad probability {parts[1]!r}") from None
        if not 0.0 <= p <= 1.0:
            raise ProbabilityError(f"line {lineno}: probability {p} out of range [0, 1]")
        given[rid] = p
    return table_from(rs, given)


def table_from(rs: RuleSet, given: dict[int, float]) -> ProbTable:
    probs: dict[int, float] = {}
    for lhs, ids in rs.index.items():
        listed = [rid for rid in ids if rid in given]
        rest = [rid for rid in ids if rid not in given]
        mass = sum(given[rid] for rid in listed)
        if mass > 1.0 + NORMALIZATION_TOL:
            raise ProbabilityError(f"probabilities for {lhs} sum to {mass} > 1")
        if rest:
            share = max(0.0, 1.0 - mass) / len(rest)
            probs.update({rid: given[rid] for rid in listed})
            probs.update({rid: share for rid in rest})
        else:
            if mass <= 0.0:
                raise ProbabilityError(f"all rules for {lhs} have probability 0")
            probs.update({rid: given[rid] / mass for rid in listed})
    return ProbTable(rs, probs)


def check_normalized(table: ProbTable) -> None:
    for lhs, ids in table.rules.index.items():
        total = sum(table.probs[rid] for rid in ids)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ProbabilityError(f"probabilities for {lhs} sum to {total}")


# --- derivations ----------------------------------------------------------

def derivation_log_probability(derivation: Sequence[int], rs: RuleSet, provider: Provider) -> float:
    """Log probability of a replayable derivation (rule ids in parser order)."""
    from .parser import replay

    return replay(derivation, rs, provider).logp


def derivation_probability(derivation: Sequence[int], table: ProbTable) -> float:
    return math.exp(derivation_log_probability(derivation, table.rules, table))


# --- unit loops -----------------------------------------------------------

@dataclass
class UnitLoopReport:
    cycles: list[list[tuple[Category, int]]]

    @property
    def ok(self) -> bool:
        return not self.cycles

    def format(self) -> str:
        if self.ok:
            return "no probability-1 rule cycles\n"
        lines = [f"{len(self.cycles)} probability-1 rule cycle(s):"]
        for cycle in self.cycles:
            steps = " -> ".join(f"{cat} (R{rid})" for cat, rid in cycle)
            lines.append(f"  {steps} -> {cycle[0][0]}")
        return "\n".join(lines) + "\n"


def _category_graph(rs: RuleSet, table: ProbTable, min_prob: float = 0.0) -> nx.DiGraph:
    g = nx.DiGraph()
    for rule in rs.rules:
        p = table.probs[rule.id]
        if p < min_prob:
            continue
        for child in rule.rhs:
            old = g.get_edge_data(rule.lhs, child)
            if old is None or p > old["prob"]:
                g.add_edge(rule.lhs, child, prob=p, rule=rule.id)
    return g


def rule_cycles(rs: RuleSet, table: ProbTable) -> list[tuple[list[tuple[Category, int]], float]]:
    """Every simple cycle of the category graph with its probability product."""
    g = _category_graph(rs, table)
    out = []
    for nodes in nx.simple_cycles(g):
        steps = [(a, g[a][b]["rule"]) for a, b in zip(nodes, nodes[1:] + nodes[:1])]
        product = math.prod(g[a][b]["prob"] for a, b in zip(nodes, nodes[1:] + nodes[:1]))
        out.append((steps, product))
    return out


def check_unit_loops(rs: RuleSet, table: ProbTable) -> UnitLoopReport:
    """Find rule cycles whose probability product is 1.

    With probabilities bounded by 1 such a cycle can only use probability-1
    edges, so the search runs on that subgraph.
    """
    g = _category_graph(rs, table, min_prob=1.0 - UNIT_TOL)
    cycles = []
    for nodes in nx.simple_cycles(g):
        edges = list(zip(nodes, nodes[1:] + nodes[:1]))
        if math.prod(g[a][b]["prob"] for a, b in edges) >= 1.0 - UNIT_TOL:
            cycles.append([(a, g[a][b]["rule"]) for a, b in edges])
    return UnitLoopReport(cycles)
