"""Acceptance checks, one class per criterion.

Run alone with ``pytest tests/test_acceptance.py``; the terminal summary
prints a PASS/FAIL line per criterion.
"""
import math
import random
import time

import pytest

from mgparser.ctw import CtwModel, CtwProvider, corpus_log_loss, kt_probability, kt_sequential, make_models, train
from mgparser.grammar import parse_lexicon
from mgparser.lcfrs import close
from mgparser.parser import (
    SUCCESS, BeamConfig, derivation_yield, format_derivation, parse, replay_steps, sample,
    check_pointer_soundness,
)
from mgparser.probability import check_unit_loops, derivation_log_probability, load_table, uniform_table
from conftest import ANBN_PROBS, grammar_text
from oracles import ctw_mixture, generate

# Reference rule tables, in reference order.  Each row: lhs, rhs, kind.
ANBN_REFERENCE = [
    ("S1", "start", "[. c]", "Start"),
    ("S2", "start", "[=a +m . c]", "Start"),
    ("L1", "[. c]", "ε :: c", "Lexicalize"),
    ("Mv1", "[=a +m . c]", "[=a . +m c, =b a . -m]", "Unmove1"),
    ("Mg1", "[=a . +m c, =b a . -m]", "[. =a +m c] [=b . a -m]", "Unmerge3Simple"),
    ("L2", "[. =a +m c]", "ε :: =a +m c", "Lexicalize"),
    ("Mg2", "[=b . a -m]", "[. =b a -m] [. b]", "Unmerge1"),
    ("Mg3", "[=b . a -m]", "[. =b a -m] [=a +m . b]", "Unmerge1"),
    ("L3", "[. =b a -m]", "a :: =b a -m", "Lexicalize"),
    ("L4", "[. b]", "b :: b", "Lexicalize"),
    ("Mv2", "[=a +m . b]", "[=a . +m b, =b a . -m]", "Unmove1"),
    ("Mg4", "[=a . +m b, =b a . -m]", "[. =a +m b] [=b . a -m]", "Unmerge3Simple"),
    ("L5", "[. =a +m b]", "b :: =a +m b", "Lexicalize"),
]

# Unmerge2 and Unmerge3Complex rows list the selected constituent first;
# compiled rules put the selector side first, so those rows are swapped
# before comparison.
CATS_REFERENCE = [
    ("start", "[=d =d . c]", "Start"),
    ("start", "[=v +wh . c]", "Start"),
    ("start", "[=v . c]", "Start"),
    ("[=d =d . c]", "[=n . d] [=d . =d c]", "Unmerge2"),
    ("[=d . =d c]", "[. =d =d c] [=n . d]", "Unmerge1"),
    ("[. =d =d c]", "ate :: =d =d c", "Lexicalize"),
    ("[=n . d]", "[. =n d] [. n]", "Unmerge1"),
    ("[. =n d]", "the :: =n d", "Lexicalize"),
    ("[. n]", "mouse :: n", "Lexicalize"),
    ("[. n]", "cat :: n", "Lexicalize"),
    ("[=v +wh . c]", "[=v . +wh c, =n d . -wh]", "Unmove1"),
    ("[=v . +wh c, =n d . -wh]", "[. =v +wh c] [=d =d . v, =n d . -wh]", "Unmerge1"),
    ("[. =v +wh c]", "did :: =v +wh c", "Lexicalize"),
    ("[=d =d . v, =n d . -wh]", "[=n . d] [=d . =d v, =n d . -wh]", "Unmerge2"),
    ("[=d =d . v, =n d . -wh]", "[=n . d -wh] [=d . =d v]", "Unmerge3Complex"),
    ("[=d . =d v, =n d . -wh]", "[. =d =d v] [=n . d -wh]", "Unmerge3Simple"),
    ("[. =d =d v]", "eat :: =d =d v", "Lexicalize"),
    ("[=n . d -wh]", "[. =n d -wh] [. n]", "Unmerge1"),
    ("[. =n d -wh]", "which :: =n d -wh", "Lexicalize"),
    ("[=d . =d v]", "[. =d =d v] [=n . d]", "Unmerge1"),
    ("[=v . c]", "[. =v c] [=d =d . v]", "Unmerge1"),
    ("[. =v c]", "did :: =v c", "Lexicalize"),
    ("[=d =d . v]", "[=n . d] [=d . =d v]", "Unmerge2"),
]

SELECTED_FIRST = {"Unmerge2", "Unmerge3Complex"}

AABB = "S2 Mv1 Mg1 Mg3 L3 Mv2 Mg4 Mg2 L3 L4 L5 L2"


def rule_rows(rs):
    rows = []
    for line in rs.format_table().splitlines():
        _, body, kind = line.split("\t")
        lhs, rhs = body.split(" -> ")
        rows.append((lhs, rhs, kind))
    return rows


def swap(rhs):
    left, right = rhs[1:-1].split("] [")
    return f"[{right}] [{left}]"


@pytest.fixture(scope="module")
def anbn_rs():
    return close(parse_lexicon(grammar_text("anbn")))


@pytest.fixture(scope="module")
def cats_rs():
    return close(parse_lexicon(grammar_text("cats_and_mice")))


@pytest.fixture(scope="module")
def anbn_probs(anbn_rs):
    return load_table(anbn_rs, ANBN_PROBS)


# --- 1 -----------------------------------------------------------------------

@pytest.mark.criterion(1, "closure golden tables")
class TestClosureGoldenTables:
    def test_anbn_table(self):
        t0 = time.perf_counter()
        rs = close(parse_lexicon(grammar_text("anbn")))
        elapsed = time.perf_counter() - t0
        rows = rule_rows(rs)
        assert rows == [(lhs, rhs, kind) for _, lhs, rhs, kind in ANBN_REFERENCE]
        assert [rs.aliases[r.id] for r in rs] == [alias for alias, *_ in ANBN_REFERENCE]
        assert len(rs.categories) == 11
        assert elapsed < 1.0

    def test_cats_table(self):
        t0 = time.perf_counter()
        rs = close(parse_lexicon(grammar_text("cats_and_mice")))
        elapsed = time.perf_counter() - t0
        expected = [(lhs, swap(rhs) if kind in SELECTED_FIRST else rhs, kind)
                    for lhs, rhs, kind in CATS_REFERENCE]
        got = rule_rows(rs)
        assert len(got) == 23
        assert sorted(got) == sorted(expected)
        assert elapsed < 1.0


# --- 2 -----------------------------------------------------------------------

@pytest.mark.criterion(2, "worked parse of 'a a b b' and ''")
class TestWorkedParse:
    def test_aabb(self, anbn_rs, anbn_probs):
        t0 = time.perf_counter()
        r = parse("a a b b".split(), anbn_rs, anbn_probs, k_best=None)
        assert r.status == SUCCESS
        assert len(r.results) == 1
        best = r.best
        assert abs(best.logp - math.log(0.3 * 0.6 * 0.4)) <= 1e-12
        aliases = format_derivation(best.derivation, anbn_rs, aliases=True).split()
        assert aliases[:3] == ["S2", "Mv1", "Mg1"]
        assert " ".join(aliases) == AABB
        assert time.perf_counter() - t0 < 1.0

    def test_empty(self, anbn_rs, anbn_probs):
        r = parse([], anbn_rs, anbn_probs)
        assert abs(r.best.logp - math.log(0.7)) <= 1e-12
        assert format_derivation(r.best.derivation, anbn_rs, aliases=True) == "S1 L1"


# --- 3 -----------------------------------------------------------------------

@pytest.mark.criterion(3, "a^n b^m accepted iff n = m (n, m <= 8)")
class TestLanguageIdentity:
    def test_against_oracle(self, anbn_rs, anbn_probs):
        language = generate(anbn_rs.lexicon, 16)
        t0 = time.perf_counter()
        for n in range(9):
            for m in range(9):
                words = ("a",) * n + ("b",) * m
                r = parse(words, anbn_rs, anbn_probs)
                assert r.ok == (words in language) == (n == m), (n, m)
        assert time.perf_counter() - t0 < 10.0


# --- 4 -----------------------------------------------------------------------

SENTENCES = ["which mouse did the cat eat", "the cat ate the mouse"]


def scrambled(language, count=20, seed=11):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        words = rng.choice(SENTENCES).split()
        rng.shuffle(words)
        if tuple(words) not in language and words not in out:
            out.append(words)
    return out


@pytest.mark.criterion(4, "cats-and-mice sentences and scrambled non-sentences")
class TestCatsAndMice:
    def test_sentences_and_scrambles(self, cats_rs):
        table = uniform_table(cats_rs)
        language = generate(cats_rs.lexicon, 6)
        t0 = time.perf_counter()
        for s in SENTENCES:
            words = s.split()
            assert tuple(words) in language
            r = parse(words, cats_rs, table)
            assert r.ok
            assert derivation_yield(r.best.derivation, cats_rs) == words
        bad = scrambled(language)
        assert len(bad) == 20
        for words in bad:
            assert not parse(words, cats_rs, table).ok, words
        assert time.perf_counter() - t0 < 5.0


# --- 5 and 6 ----------------------------------------------------------------

N_SAMPLES = 1000


def sampled_runs(rs, table, seed):
    rng = random.Random(seed)
    runs = []
    for _ in range(N_SAMPLES):
        s = sample(rs, table, rng)
        for h, _, _ in replay_steps(s.derivation, rs):
            check_pointer_soundness(h)
        r = parse(s.words, rs, table, k_best=None, check_invariants=True)
        runs.append((s, r))
    return runs


@pytest.fixture(scope="module")
def runs(anbn_rs, anbn_probs, cats_rs):
    return {
        "anbn": sampled_runs(anbn_rs, anbn_probs, 1),
        "cats": sampled_runs(cats_rs, uniform_table(cats_rs), 2),
    }


@pytest.mark.criterion(5, "pointer soundness on sampled-then-parsed derivations")
class TestPointerSoundness:
    @pytest.mark.parametrize("grammar", ["anbn", "cats"])
    def test_no_violations(self, runs, grammar):
        # check_pointer_soundness raises inside the fixture on any violation
        assert len(runs[grammar]) == N_SAMPLES
        assert all(r.status == SUCCESS for _, r in runs[grammar])


@pytest.mark.criterion(6, "sample/parse round trip")
class TestRoundTrip:
    @pytest.mark.parametrize("grammar", ["anbn", "cats"])
    def test_round_trip(self, runs, grammar):
        failures = [
            s for s, r in runs[grammar]
            if s.derivation not in {o.derivation for o in r.results} or r.best.logp < s.logp - 1e-12
        ]
        assert failures == []


# --- 7 -----------------------------------------------------------------------

@pytest.mark.criterion(7, "unit-loop validator")
class TestUnitLoops:
    def test_mu_zero_rejected(self, anbn_rs):
        report = check_unit_loops(anbn_rs, load_table(anbn_rs, "S1 .7\nS2 .3\nMg2 0\nMg3 1\n"))
        assert not report.ok
        (cycle,) = report.cycles
        assert {anbn_rs.aliases[rid] for _, rid in cycle} == {"Mg3", "Mv2", "Mg4"}

    def test_mu_04_passes(self, anbn_rs, anbn_probs):
        from mgparser.probability import rule_cycles

        assert check_unit_loops(anbn_rs, anbn_probs).ok
        (cycle, product), = rule_cycles(anbn_rs, anbn_probs)
        assert product == pytest.approx(0.6, abs=1e-12)


# --- 8 -----------------------------------------------------------------------

@pytest.mark.criterion(8, "KT sequential product equals the closed form")
class TestKtExactness:
    def test_all_pairs(self):
        for a in range(51):
            for b in range(51 - a):
                counts = [0, 0]
                product = 1.0
                for sym in [0] * a + [1] * b:
                    product *= kt_sequential(counts, sym)
                    counts[sym] += 1
                closed = kt_probability([a, b])
                assert abs(product - closed) <= 1e-9 * closed, (a, b)

    def test_named_values(self):
        assert kt_probability([2, 0]) == pytest.approx(3 / 8, abs=1e-12)
        assert kt_probability([1, 1]) == pytest.approx(1 / 8, abs=1e-12)
        assert kt_probability([2, 2]) == pytest.approx(3 / 128, abs=1e-12)


# --- 9 -----------------------------------------------------------------------

@pytest.mark.criterion(9, "CTW equals the brute-force context-tree mixture")
class TestCtwOracle:
    def test_random_sequences(self):
        rng = random.Random(5)
        worst = 0.0
        for trial in range(200):
            depth = trial % 3
            seq = [rng.randrange(2) for _ in range(rng.randint(1, 16))]
            history = [rng.randrange(2) for _ in range(2)]
            m = CtwModel([0, 1], depth)
            contexts = []
            for t, y in enumerate(seq):
                ctx = tuple(reversed(history[-2:]))
                before = ctw_mixture(seq[:t], contexts, depth)
                for cand in (0, 1):
                    oracle = ctw_mixture(seq[:t] + [cand], contexts + [ctx], depth) / before
                    worst = max(worst, abs(m.predict(ctx, cand) - float(oracle)))
                m.update(ctx, y)
                contexts.append(ctx)
                history.append(y)
            assert math.exp(m.log_sequence_probability()) == pytest.approx(
                float(ctw_mixture(seq, contexts, depth)), rel=1e-12)
        assert worst <= 1e-12


# --- 10 ----------------------------------------------------------------------

@pytest.mark.criterion(10, "CTW log-loss within 0.02 bits of the source entropy")
class TestEntropy:
    def test_order1_markov(self):
        flip = {0: 0.1, 1: 0.3}  # probability of leaving each state

        def h(p):
            return -p * math.log2(p) - (1 - p) * math.log2(1 - p)

        pi0 = flip[1] / (flip[0] + flip[1])
        entropy = pi0 * h(flip[0]) + (1 - pi0) * h(flip[1])
        rng = random.Random(2024)
        n = 100_000
        t0 = time.perf_counter()
        m = CtwModel([0, 1], 2)
        prev, ctx, bits = 0, (), 0.0
        for _ in range(n):
            x = prev ^ (rng.random() < flip[prev])
            bits -= math.log2(m.predict(ctx, x))
            m.update(ctx, x)
            ctx = ((x,) + ctx)[:2]
            prev = x
        per_symbol = bits / n
        print(f"entropy {entropy:.5f} bits, CTW {per_symbol:.5f} bits/symbol")
        assert abs(per_symbol - entropy) <= 0.02
        assert time.perf_counter() - t0 < 30.0


# --- 11 ----------------------------------------------------------------------

CATS_SKEWED = "R1 0.6\nR2 0.3\nR3 0.1\nR14 0.8\nR15 0.2\n"


@pytest.mark.criterion(11, "CTW beats the uniform provider on sampled parses")
class TestCtwOnParses:
    def test_log_loss(self, cats_rs):
        source = load_table(cats_rs, CATS_SKEWED)
        rng = random.Random(9)
        corpus = [sample(cats_rs, source, rng).derivation for _ in range(500)]
        uniform = corpus_log_loss(uniform_table(cats_rs), corpus, cats_rs)
        models = make_models(cats_rs, 2)
        assert train(models, corpus, cats_rs) == []
        trained = corpus_log_loss(CtwProvider(models, cats_rs), corpus, cats_rs)
        # Sequential code length of the same choices, learned on the fly.
        online = -sum(m.log_sequence_probability() for m in models.values()) / math.log(2)
        print(f"uniform {uniform.total:.1f} bits, trained {trained.total:.1f}, online {online:.1f}")
        assert trained.total < uniform.total
        assert online < uniform.total


# --- 12 ----------------------------------------------------------------------

GARDEN_PATH = "w1 :: =a c\nw2 :: a\nw1 :: =b c\nw3 :: b\n"


@pytest.mark.criterion(12, "beam keeps maximal parses and can garden-path")
class TestBeam:
    @pytest.mark.parametrize("rel", [0.1])
    def test_beam_matches_exhaustive(self, anbn_rs, anbn_probs, cats_rs, rel):
        cases = [(anbn_rs, anbn_probs, ("a",) * n + ("b",) * n) for n in range(7)]
        cats_table = load_table(cats_rs, CATS_SKEWED)
        cases += [(cats_rs, cats_table, s) for s in sorted(generate(cats_rs.lexicon, 6))]
        for rs, table, words in cases:
            off = parse(words, rs, table)
            on = parse(words, rs, table, BeamConfig(rel))
            assert on.ok and on.best.derivation == off.best.derivation, words
            assert on.steps <= off.steps

    def test_large_factor_prunes_the_only_parse(self, anbn_rs, anbn_probs):
        # S2 (.3) falls below .5 x S1 (.7) at the first step, so no
        # sentence but the empty one survives a beam this narrow.
        words = ["a", "b"]
        assert parse(words, anbn_rs, anbn_probs).ok
        assert not parse(words, anbn_rs, anbn_probs, BeamConfig(0.5)).ok

    def test_garden_path(self):
        rs = close(parse_lexicon(GARDEN_PATH))
        table = load_table(rs, "S1 .95\nS2 .05\n")
        words = ["w1", "w3"]
        assert parse(words, rs, table).ok
        assert not parse(words, rs, table, BeamConfig(0.1)).ok
        assert derivation_log_probability(parse(words, rs, table).best.derivation, rs, table) == \
            pytest.approx(math.log(0.05))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
