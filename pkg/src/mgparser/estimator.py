"""scikit-learn style wrapper around compile, parse, sample and train."""
from __future__ import annotations

import math
import os
import random
from typing import Sequence

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from . import ctw
from .grammar import Lexicon, parse_lexicon
from .lcfrs import close
from .parser import BeamConfig, parse, parse_derivation, sample
from .probability import ProbTable, load_table, table_from, uniform_table


def _load_grammar(grammar) -> Lexicon:
    if isinstance(grammar, Lexicon):
        return grammar
    if isinstance(grammar, (str, os.PathLike)):
        if isinstance(grammar, os.PathLike) or ("::" not in grammar and os.path.exists(grammar)):
            with open(grammar, encoding="utf-8") as fh:
                return parse_lexicon(fh.read())
        return parse_lexicon(grammar)
    raise TypeError(f"grammar must be a Lexicon, a path or grammar text, not {type(grammar).__name__}")


def check_sentences(X) -> list[tuple[str, ...]]:
    """Accept a single sentence string, or a sequence of strings / token lists."""
    if isinstance(X, str):
        X = [X]
    out = []
    for x in X:
        if isinstance(x, str):
            out.append(tuple(x.split()))
        elif isinstance(x, Sequence) and all(isinstance(w, str) for w in x):
            out.append(tuple(x))
        else:
            raise ValueError(f"expected a sentence string or token list, got {x!r}")
    return out


class MinimalistParser(BaseEstimator):
    """Probabilistic top-down MG parser.

    `fit` compiles the grammar, builds the rule table and, when `ctw_depth`
    is set, trains context-tree models on a corpus of derivations.

    >>> p = MinimalistParser(grammar="b :: b\\n:: =b c").fit()
    >>> p.predict(["b"])[0]
    (1, 2, 3, 4)
    """

    def __init__(self, grammar=None, probabilities=None, beam=0.0, max_queue=None,
                 k_best=1, max_steps=10**6, ctw_depth=None, ctw_estimator="kt"):
        self.grammar = grammar
        self.probabilities = probabilities
        self.beam = beam
        self.max_queue = max_queue
        self.k_best = k_best
        self.max_steps = max_steps
        self.ctw_depth = ctw_depth
        self.ctw_estimator = ctw_estimator

    def _table(self, rs) -> ProbTable:
        p = self.probabilities
        if p is None:
            return uniform_table(rs)
        if isinstance(p, str):
            return load_table(rs, p)
        if isinstance(p, dict):
            return table_from(rs, {k if isinstance(k, int) else rs.resolve(k): v for k, v in p.items()})
        raise TypeError("probabilities must be None, table text or a dict")

    def _derivations(self, X):
        out = []
        for d in X:
            out.append(parse_derivation(d, self.rules_) if isinstance(d, str) else tuple(d))
        return out

    def fit(self, X=None, y=None):
        """Compile; with `ctw_depth` set, train on derivations `X` (strings or id lists)."""
        if self.grammar is None:
            raise ValueError("grammar is required")
        if not 0.0 <= self.beam <= 1.0:
            raise ValueError("beam must lie in [0, 1]")
        self.lexicon_ = _load_grammar(self.grammar)
        self.rules_ = close(self.lexicon_)
        self.table_ = self._table(self.rules_)
        self.provider_ = self.table_
        self.models_ = None
        self.skipped_ = []
        if self.ctw_depth is not None:
            self.models_ = ctw.make_models(self.rules_, self.ctw_depth, self.ctw_estimator)
            if X is not None:
                self.skipped_ = ctw.train(self.models_, self._derivations(X), self.rules_)
            self.provider_ = ctw.CtwProvider(self.models_, self.rules_, fallback=self.table_)
        elif X is not None:
            raise ValueError("training data given but ctw_depth is None")
        return self

    def parse(self, X) -> list:
        check_is_fitted(self, "rules_")
        beam = BeamConfig(self.beam, self.max_queue)
        return [parse(s, self.rules_, self.provider_, beam, self.k_best, self.max_steps)
                for s in check_sentences(X)]

    def predict(self, X) -> list:
        """Best derivation per sentence, or None when it does not parse."""
        return [r.best.derivation if r.best else None for r in self.parse(X)]

    def predict_log_proba(self, X) -> list[float]:
        return [r.best.logp if r.best else -math.inf for r in self.parse(X)]

    def score(self, X, y=None) -> float:
        """Mean best-derivation log probability."""
        scores = self.predict_log_proba(X)
        return sum(scores) / len(scores) if scores else 0.0

    def sample(self, n_samples=1, random_state=None) -> list:
        check_is_fitted(self, "rules_")
        rng = random_state if isinstance(random_state, random.Random) else random.Random(random_state)
        return [sample(self.rules_, self.provider_, rng) for _ in range(n_samples)]


__all__ = ["MinimalistParser", "NotFittedError", "check_sentences"]
