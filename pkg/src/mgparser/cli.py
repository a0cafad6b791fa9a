"""Command-line front end: ``mgparser compile|parse|sample|train``."""
from __future__ import annotations

import argparse
import json
import math
import random
import sys
from concurrent.futures import ThreadPoolExecutor

from . import ctw
from .grammar import GrammarError, parse_lexicon
from .lcfrs import ClosureError, check_smc, close, read_rule_table
from .parser import (
    ABORTED, SUCCESS, BeamConfig, DerivationError, SampleOverflow, derivation_tree,
    format_derivation, parse, parse_derivation, sample,
)
from .probability import ProbabilityError, check_unit_loops, load_table, uniform_table

EXIT_OK = 0
EXIT_UNGRAMMATICAL = 1
EXIT_INPUT = 2
EXIT_ABORTED = 3


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_rules(args):
    lex = parse_lexicon(_read(args.grammar))
    if getattr(args, "rules", None):
        return read_rule_table(_read(args.rules), lex)
    return close(lex)


def load_provider(args, rs):
    table = load_table(rs, _read(args.probs)) if args.probs else uniform_table(rs)
    if getattr(args, "model", None):
        models = ctw.load_models(_read(args.model), rs)
        return table, ctw.CtwProvider(models, rs, fallback=table)
    return table, table


def _fmt_prob(logp: float) -> str:
    return f"{math.exp(logp):.6g}"


# --- subcommands ----------------------------------------------------------

def cmd_compile(args) -> int:
    rs = load_rules(args)
    _write(args.output, rs.format_table())
    report = [f"{len(rs)} rules, {len(rs.categories)} categories"]
    bad = [c for c in rs.categories if not check_smc(c)]
    report.append("SMC: ok" if not bad else f"SMC: {len(bad)} violating categories")
    loops_ok = True
    if args.probs:
        loops = check_unit_loops(rs, load_table(rs, _read(args.probs)))
        report += loops.format().splitlines()
        loops_ok = loops.ok
    # Keep stdout loadable as a rule table when the table went there too.
    prefix = "# " if args.output in (None, "-") else ""
    sys.stdout.write("".join(f"{prefix}{line}\n" for line in report))
    return EXIT_OK if loops_ok and not bad else EXIT_INPUT


def _result_record(sentence, result, rs) -> dict:
    return {
        "sentence": " ".join(sentence),
        "status": result.status,
        "steps": result.steps,
        "results": [
            {
                "derivation": [f"R{r}" for r in o.derivation],
                "aliases": [rs.aliases[r] for r in o.derivation],
                "prob": o.prob,
                "logp": o.logp,
                "yield": " ".join(o.words),
            }
            for o in result.results
        ],
    }


def _render(sentence, result, rs, fmt) -> str:
    if fmt == "json-lines":
        return json.dumps(_result_record(sentence, result, rs), ensure_ascii=False) + "\n"
    lines = [f"# {' '.join(sentence) or 'ε'}"]
    if fmt == "trace":
        lines += result.trace
    for rank, o in enumerate(result.results, start=1):
        lines.append(f"{rank}\t{_fmt_prob(o.logp)}\t{format_derivation(o.derivation, rs, aliases=True)}"
                     f"\t({format_derivation(o.derivation)})")
        if fmt == "tree":
            lines.append(derivation_tree(o.derivation, rs).rstrip("\n"))
    if result.status != SUCCESS:
        lines.append(f"{result.status} after {result.steps} steps")
    return "\n".join(lines) + "\n"


def cmd_parse(args) -> int:
    rs = load_rules(args)
    _, provider = load_provider(args, rs)
    sentences = [s.split() for s in args.sentences]
    if args.file:
        sentences += [ln.split() for ln in _read(args.file).splitlines()]
    beam = BeamConfig(args.beam, args.max_queue)
    k_best = None if args.k_best == 0 else args.k_best

    def run(words):
        return parse(words, rs, provider, beam, k_best, args.max_steps,
                     trace=args.format == "trace")

    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            results = list(pool.map(run, sentences))
    else:
        results = [run(s) for s in sentences]
    code = EXIT_OK
    for words, result in zip(sentences, results):
        sys.stdout.write(_render(words, result, rs, args.format))
        if result.status == ABORTED:
            code = max(code, EXIT_ABORTED)
        elif result.status != SUCCESS:
            code = max(code, EXIT_UNGRAMMATICAL)
    return code


def cmd_sample(args) -> int:
    rs = load_rules(args)
    _, provider = load_provider(args, rs)
    rng = random.Random(args.seed)
    for _ in range(args.count):
        try:
            s = sample(rs, provider, rng, args.max_steps)
        except SampleOverflow:
            print("# overflow")
            continue
        if args.format == "json-lines":
            print(json.dumps({"yield": " ".join(s.words), "prob": math.exp(s.logp),
                              "derivation": [f"R{r}" for r in s.derivation]}, ensure_ascii=False))
        elif args.format == "derivation":
            print(format_derivation(s.derivation, rs, aliases=True))
        else:
            print(f"{' '.join(s.words) or 'ε'}\t{_fmt_prob(s.logp)}\t"
                  f"{format_derivation(s.derivation, rs, aliases=True)}")
    return EXIT_OK


def cmd_train(args) -> int:
    rs = load_rules(args)
    table, provider = load_provider(args, rs)
    if isinstance(provider, ctw.CtwProvider):
        models = provider.models
    else:
        models = ctw.make_models(rs, args.depth, args.estimator)
    good, skipped = [], []
    for lineno, line in enumerate(_read(args.corpus).splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            d = parse_derivation(line, rs)
            ctw.derivation_events(d, rs)
        except DerivationError as exc:
            skipped.append((lineno, str(exc)))
            continue
        good.append(d)
    before = ctw.CtwProvider(models, rs, fallback=table)
    loss_before = ctw.corpus_log_loss(before, good, rs)
    ctw.train(models, good, rs)
    after = ctw.CtwProvider(models, rs, fallback=table)
    loss_after = ctw.corpus_log_loss(after, good, rs)
    _write(args.output, ctw.dump_models(models, rs))
    for lineno, reason in sorted(skipped):
        print(f"skipped line {lineno}: {reason}", file=sys.stderr)
    print(f"trained on {len(good)} derivations ({len(skipped)} skipped)")
    print("log-loss before: " + loss_before.format(), end="")
    print("log-loss after: " + loss_after.format(), end="")
    return EXIT_OK


# --- argument parsing -----------------------------------------------------

def _unit_interval(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mgparser", description="Probabilistic top-down MG parsing.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, provider=True):
        p.add_argument("grammar", help="lexicon file")
        p.add_argument("--rules", help="rule table written by 'compile' (checked against the grammar)")
        if provider:
            p.add_argument("--probs", help="probability file (R<id> <p> lines)")
            p.add_argument("--model", help="CTW model snapshot; the table is the fallback")

    p = sub.add_parser("compile", help="compile a lexicon into its rule table")
    p.add_argument("grammar")
    p.add_argument("--rules", help=argparse.SUPPRESS)
    p.add_argument("--probs", help="check this probability file for unit loops")
    p.add_argument("-o", "--output", help="write the rule table here (default stdout)")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("parse", help="parse sentences")
    common(p)
    p.add_argument("sentences", nargs="*", help="sentences (quote each one; '' is the empty string)")
    p.add_argument("-f", "--file", help="one sentence per line")
    p.add_argument("--beam", type=_unit_interval, default=0.0, help="relative beam factor (0 = off)")
    p.add_argument("--max-queue", type=int, default=None)
    p.add_argument("-k", "--k-best", type=int, default=1, help="results per sentence (0 = all)")
    p.add_argument("--max-steps", type=int, default=10**6)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("table", "trace", "tree", "json-lines"), default="table")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("sample", help="draw random derivations")
    common(p)
    p.add_argument("-n", "--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--format", choices=("table", "derivation", "json-lines"), default="table")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train", help="train CTW rule models on a derivation corpus")
    common(p)
    p.add_argument("corpus", help="one derivation per line")
    p.add_argument("-o", "--output", required=True, help="snapshot file to write")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--estimator", choices=ctw.ESTIMATORS, default=ctw.KT)
    p.set_defaults(func=cmd_train)
    ap._subcommands = sub.choices
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    commands = ap._subcommands
    if argv and argv[0] in commands:
        # Intermixed so that sentences may follow options.
        args = commands[argv[0]].parse_intermixed_args(argv[1:])
    else:
        args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (GrammarError, ProbabilityError, ClosureError, InputError, ValueError) as exc:
        print(f"mgparser: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
