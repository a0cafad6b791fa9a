"""Context-tree weighting over rule-path contexts.

One model per left-hand category with at least two rules.  A model predicts
which rule rewrites that category, given the ids of the rules dominating the
node (nearest first).  Contexts shorter than the model depth are padded with
`BOUNDARY`, so the root of the derivation acts as an absorbing context.
"""
from __future__ import annotations

import hashlib
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

from .lcfrs import Category, Rule, RuleSet
from .parser import DerivationError, replay_steps
from .probability import Provider

KT = "kt"
ZR = "zr"
ESTIMATORS = (KT, ZR)
BOUNDARY = -1
SNAPSHOT_FORMAT = "mgparser-ctw"
SNAPSHOT_VERSION = 1

_LOG_HALF = math.log(0.5)
_LOG_QUARTER = math.log(0.25)
_LGAMMA_HALF = math.lgamma(0.5)


# --- base estimators ------------------------------------------------------

def kt_sequential(counts: Sequence[int], symbol: int) -> float:
    """Predictive probability of `symbol` after observing `counts`."""
    return (counts[symbol] + 0.5) / (sum(counts) + len(counts) / 2)


def kt_log_probability(counts: Sequence[int]) -> float:
    """Log probability of any sequence with these symbol counts (Gamma-ratio form)."""
    k = len(counts)
    total = sum(counts)
    out = math.lgamma(k / 2) - math.lgamma(total + k / 2)
    for c in counts:
        if c:
            out += math.lgamma(c + 0.5) - _LGAMMA_HALF
    return out


def kt_probability(counts: Sequence[int]) -> float:
    return math.exp(kt_log_probability(counts))


def _check_binary(counts: Sequence[int]) -> None:
    if len(counts) != 2:
        raise ValueError("the zero-redundancy estimator is defined for binary alphabets only")


def zr_log_probability(counts: Sequence[int]) -> float:
    """Half KT, plus a quarter for each all-one-symbol outcome."""
    _check_binary(counts)
    a, b = counts
    if a == 0 and b == 0:
        return 0.0
    terms = [_LOG_HALF + kt_log_probability(counts)]
    if a == 0 or b == 0:
        terms.append(_LOG_QUARTER)
    return _logsumexp(terms)


def zr_probability(counts: Sequence[int]) -> float:
    return math.exp(zr_log_probability(counts))


def zr_sequential(counts: Sequence[int], symbol: int) -> float:
    after = list(counts)
    after[symbol] += 1
    return math.exp(zr_log_probability(after) - zr_log_probability(counts))


_LOG_ESTIMATE = {KT: kt_log_probability, ZR: zr_log_probability}


def _logsumexp(xs: Sequence[float]) -> float:
    m = max(xs)
    if m == -math.inf:
        return m
    return m + math.log(sum(math.exp(x - m) for x in xs))


def _logaddexp(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    if b == -math.inf:
        return a
    return a + math.log1p(math.exp(b - a))


# --- context trees --------------------------------------------------------

class CtwNode:
    __slots__ = ("counts", "children", "log_pe", "log_pw", "log_kids")

    def __init__(self, k: int):
        self.counts = [0] * k
        self.children: dict[Hashable, CtwNode] = {}
        self.log_pe = 0.0
        self.log_pw = 0.0
        self.log_kids = 0.0  # sum of children's log_pw

    @property
    def total(self) -> int:
        return sum(self.counts)


class CtwModel:
    """Weighted mixture over all context trees of depth at most `max_depth`."""

    def __init__(self, alphabet: Sequence[Hashable], max_depth: int = 2, estimator: str = KT):
        if estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {estimator!r}")
        if max_depth < 0:
            raise ValueError("max_depth must be nonnegative")
        if len(set(alphabet)) != len(alphabet) or not alphabet:
            raise ValueError("alphabet must be nonempty with distinct symbols")
        self.alphabet = tuple(alphabet)
        self.index = {s: i for i, s in enumerate(self.alphabet)}
        self.max_depth = max_depth
        self.estimator = estimator
        if estimator == ZR and len(self.alphabet) != 2:
            raise ValueError("the zero-redundancy estimator is defined for binary alphabets only")
        self.root = CtwNode(len(self.alphabet))
        k = len(self.alphabet)
        self._w_est = math.log((k - 1) / k) if k > 1 else -math.inf
        self._w_split = math.log(1 / k)

    @property
    def K(self) -> int:
        return len(self.alphabet)

    @property
    def trained(self) -> bool:
        return self.root.total > 0

    def _context(self, context: Sequence[Hashable]) -> list[Hashable]:
        ctx = list(context[: self.max_depth])
        ctx += [BOUNDARY] * (self.max_depth - len(ctx))
        return ctx

    def _path(self, context, create: bool) -> list[CtwNode | None]:
        nodes: list[CtwNode | None] = [self.root]
        node = self.root
        for sym in self._context(context):
            child = node.children.get(sym) if node is not None else None
            if child is None and create and node is not None:
                child = node.children[sym] = CtwNode(self.K)
            nodes.append(child)
            node = child
        return nodes

    def _log_pe(self, counts) -> float:
        return _LOG_ESTIMATE[self.estimator](counts)

    def _weigh(self, depth: int, log_pe: float, log_kids: float) -> float:
        if depth == self.max_depth:
            return log_pe
        return _logaddexp(self._w_est + log_pe, self._w_split + log_kids)

    def _log_pw_after(self, context, y: int) -> float:
        """Root log P_w if `y` were appended under `context` (no mutation)."""
        nodes = self._path(context, create=False)
        new_child = old_child = 0.0
        for depth in range(self.max_depth, -1, -1):
            node = nodes[depth]
            if node is None:
                counts = [0] * self.K
                log_kids = 0.0
            else:
                counts = list(node.counts)
                log_kids = node.log_kids
            if depth < self.max_depth:
                log_kids += new_child - old_child
            old_child = node.log_pw if node is not None else 0.0
            counts[y] += 1
            new_child = self._weigh(depth, self._log_pe(counts), log_kids)
        return new_child

    def log_sequence_probability(self) -> float:
        """Log weighted probability of everything observed so far."""
        return self.root.log_pw

    def predict_log_proba(self, context: Sequence[Hashable] = ()) -> dict[Hashable, float]:
        base = self.root.log_pw
        logs = [self._log_pw_after(context, i) - base for i in range(self.K)]
        # Renormalize to absorb rounding; the ratios already sum to 1.
        z = _logsumexp(logs)
        return {s: lp - z for s, lp in zip(self.alphabet, logs)}

    def predict_proba(self, context: Sequence[Hashable] = ()) -> dict[Hashable, float]:
        return {s: math.exp(lp) for s, lp in self.predict_log_proba(context).items()}

    def predict(self, context: Sequence[Hashable], symbol: Hashable) -> float:
        i = self.index[symbol]
        return math.exp(self._log_pw_after(context, i) - self.root.log_pw)

    def update(self, context: Sequence[Hashable], symbol: Hashable) -> None:
        i = self.index[symbol]
        nodes = self._path(context, create=True)
        old_child = new_child = 0.0
        for depth in range(self.max_depth, -1, -1):
            node = nodes[depth]
            node.counts[i] += 1
            node.log_pe = self._log_pe(node.counts)
            if depth < self.max_depth:
                node.log_kids += new_child - old_child
            old_child = node.log_pw
            node.log_pw = self._weigh(depth, node.log_pe, node.log_kids)
            new_child = node.log_pw

    def refresh(self) -> None:
        """Recompute every cached estimate from the counts."""

        def walk(node: CtwNode, depth: int) -> float:
            node.log_pe = self._log_pe(node.counts)
            node.log_kids = sum(walk(c, depth + 1) for c in node.children.values())
            node.log_pw = self._weigh(depth, node.log_pe, node.log_kids)
            return node.log_pw

        walk(self.root, 0)

    # snapshot helpers
    def to_dict(self) -> dict:
        def dump(node: CtwNode) -> dict:
            out = {"counts": list(node.counts)}
            if node.children:
                out["children"] = [[sym, dump(c)] for sym, c in node.children.items()]
            return out

        return {"alphabet": list(self.alphabet), "max_depth": self.max_depth,
                "estimator": self.estimator, "tree": dump(self.root)}

    @classmethod
    def from_dict(cls, data: dict) -> "CtwModel":
        model = cls(data["alphabet"], data["max_depth"], data["estimator"])

        def load(raw: dict, depth: int) -> CtwNode:
            node = CtwNode(model.K)
            counts = raw["counts"]
            if len(counts) != model.K or any(c < 0 for c in counts):
                raise ValueError("bad counts in snapshot")
            node.counts = list(counts)
            if depth == model.max_depth and raw.get("children"):
                raise ValueError("snapshot tree is deeper than max_depth")
            for sym, child in raw.get("children", ()):
                node.children[sym] = load(child, depth + 1)
            return node

        model.root = load(data["tree"], 0)
        model.refresh()
        return model


# --- rule providers -------------------------------------------------------

def choice_groups(rs: RuleSet) -> dict[Category, list[int]]:
    """Left-hand categories with a real choice, mapped to their rule ids."""
    return {lhs: list(ids) for lhs, ids in rs.index.items() if len(ids) > 1}


def make_models(rs: RuleSet, max_depth: int = 2, estimator: str = KT) -> dict[Category, CtwModel]:
    models = {}
    for lhs, ids in choice_groups(rs).items():
        est = estimator if estimator != ZR or len(ids) == 2 else KT
        models[lhs] = CtwModel(ids, max_depth, est)
    return models


class CtwProvider:
    """Rule probabilities predicted from the rule-path context.

    Models must not be trained while a provider built on them is in use;
    call `clear_cache` after any update.
    """

    def __init__(self, models: dict[Category, CtwModel], rs: RuleSet,
                 fallback: Provider | None = None):
        self.models = models
        self.rules = rs
        self.fallback = fallback
        self._cache: dict[tuple, dict[int, float]] = {}

    def clear_cache(self) -> None:
        self._cache.clear()

    def log_prob(self, rule: Rule, context: Sequence[int] = ()) -> float:
        model = self.models.get(rule.lhs)
        if model is None:
            if len(self.rules.index.get(rule.lhs, ())) == 1:
                return 0.0
            if self.fallback is None:
                raise KeyError(f"no model for {rule.lhs}")
            return self.fallback.log_prob(rule, context)
        if not model.trained and self.fallback is not None:
            return self.fallback.log_prob(rule, context)
        key = (rule.lhs, tuple(context[: model.max_depth]))
        dist = self._cache.get(key)
        if dist is None:
            dist = self._cache[key] = model.predict_log_proba(context)
        return dist[rule.id]

    def prob(self, rule: Rule, context: Sequence[int] = ()) -> float:
        return math.exp(self.log_prob(rule, context))


# --- training -------------------------------------------------------------

def derivation_events(derivation: Sequence[int], rs: RuleSet) -> list[tuple[Category, tuple[int, ...], int]]:
    """(lhs, rule-path context, chosen rule id) for every rewrite in a derivation."""
    events = []
    for _, leaf, rule in replay_steps(derivation, rs):
        if rule is not None:
            events.append((leaf.category, leaf.path, rule.id))
    return events


def train(models: dict[Category, CtwModel], corpus: Iterable[Sequence[int]],
          rs: RuleSet) -> list[tuple[int, str]]:
    """Update models with every choice event; returns ``(index, reason)`` for skipped items."""
    skipped = []
    for n, derivation in enumerate(corpus):
        try:
            events = derivation_events(derivation, rs)
        except DerivationError as exc:
            skipped.append((n, str(exc)))
            continue
        for lhs, context, rid in events:
            model = models.get(lhs)
            if model is not None:
                model.update(context, rid)
    return skipped


@dataclass
class LogLoss:
    total: float  # bits
    events: int
    by_lhs: dict[Category, float]

    def format(self) -> str:
        lines = [f"total {self.total:.4f} bits over {self.events} events"]
        for lhs, bits in sorted(self.by_lhs.items(), key=lambda kv: str(kv[0])):
            lines.append(f"  {lhs}\t{bits:.4f}")
        return "\n".join(lines) + "\n"


def corpus_log_loss(provider: Provider, corpus: Iterable[Sequence[int]], rs: RuleSet) -> LogLoss:
    """Code length in bits of the rule choices in a corpus under `provider`."""
    by_lhs: dict[Category, float] = defaultdict(float)
    events = 0
    for derivation in corpus:
        for lhs, context, rid in derivation_events(derivation, rs):
            if len(rs.index[lhs]) < 2:
                continue
            by_lhs[lhs] += -provider.log_prob(rs[rid], context) / math.log(2)
            events += 1
    return LogLoss(sum(by_lhs.values()), events, dict(by_lhs))


# --- snapshots ------------------------------------------------------------

def rules_fingerprint(rs: RuleSet) -> str:
    return hashlib.sha256(rs.format_table().encode()).hexdigest()


def dump_models(models: dict[Category, CtwModel], rs: RuleSet) -> str:
    data = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "rules": rules_fingerprint(rs),
        "models": [dict(lhs=str(lhs), **m.to_dict()) for lhs, m in models.items()],
    }
    return json.dumps(data, indent=1, sort_keys=True) + "\n"


def load_models(text: str, rs: RuleSet) -> dict[Category, CtwModel]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"not a model snapshot: {exc}") from None
    if data.get("format") != SNAPSHOT_FORMAT or data.get("version") != SNAPSHOT_VERSION:
        raise ValueError("unsupported model snapshot format")
    if data.get("rules") != rules_fingerprint(rs):
        raise ValueError("snapshot was trained on a different rule table")
    by_name = {str(lhs): lhs for lhs in rs.index}
    models = {}
    for raw in data["models"]:
        lhs = by_name.get(raw["lhs"])
        if lhs is None:
            raise ValueError(f"unknown category {raw['lhs']} in snapshot")
        models[lhs] = CtwModel.from_dict(raw)
    return models
