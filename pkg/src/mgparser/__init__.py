"""Probabilistic top-down parsing for minimalist grammars."""
from .grammar import Feature, GrammarError, LexicalItem, Lexicon, format_lexicon, parse_lexicon
from .lcfrs import START, Category, DottedString, Rule, RuleKind, RuleSet, close, read_rule_table
from .parser import (
    BeamConfig, DerivationError, ParseResult, derivation_tree, derivation_yield,
    format_derivation, parse, parse_derivation, replay, sample,
)
from .probability import (
    ProbabilityError, ProbTable, check_unit_loops, derivation_probability, load_table,
    uniform_table,
)
from .ctw import CtwModel, CtwProvider, make_models, train
from .estimator import MinimalistParser

__all__ = [
    "BeamConfig", "Category", "CtwModel", "CtwProvider", "DerivationError", "DottedString",
    "Feature", "GrammarError", "LexicalItem", "Lexicon", "MinimalistParser", "ParseResult",
    "ProbTable", "ProbabilityError", "Rule", "RuleKind", "RuleSet", "START", "check_unit_loops",
    "close", "derivation_probability", "derivation_tree", "derivation_yield", "format_derivation",
    "format_lexicon", "load_table", "make_models", "parse", "parse_derivation", "parse_lexicon",
    "read_rule_table", "replay", "sample", "train", "uniform_table",
]
