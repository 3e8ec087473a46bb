"""Benchmark harness CLI.

Subcommands:
  run          decode a corpus across modes, emit a JSON report
  gen-corpus   write a deterministic synthetic token corpus
  gen-model    train a Markov model on a corpus and write the model file
  check-report verify that a report's aggregates match its per-prompt rows

Exit codes for run: 0 success, 2 input parse failure, 3 losslessness
mismatch under --compare.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .corpus import Corpus, gen_corpus, load_corpus, save_corpus
from .drafting import DraftConfig
from .engine import (
    MODES,
    PHASES,
    RANK_BUCKETS,
    DecodeConfig,
    DecodeResult,
    decode,
    rank_histogram,
)
from .models import MarkovTableModel, load_model_file, save_model_file
from .ngram_index import NGramIndex
from .tree import format_tree

# spread per-prompt seeds apart so decode rngs never overlap
PROMPT_SEED_STRIDE = 1_000_003


def prompt_seed(base_seed: int, prompt_index: int) -> int:
    return base_seed * PROMPT_SEED_STRIDE + prompt_index


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logitspec-bench")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="decode a corpus and report metrics")
    run.add_argument("--model", required=True)
    run.add_argument("--corpus", required=True)
    run.add_argument("--mode", default="logitspec", help="comma-separated list of modes")
    run.add_argument("--max-new-tokens", type=int, default=128)
    run.add_argument("--temperature", type=float, default=0.0)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--top-k", type=int, default=16)
    run.add_argument("--capacity", type=int, default=60)
    run.add_argument("--m-start", type=int, default=3)
    run.add_argument("--last-logit-k", type=int, default=60)
    run.add_argument("--json-out", default=None, help="report path (default: stdout)")
    run.add_argument(
        "--compare",
        action="store_true",
        help="assert each mode's output matches autoregressive decoding",
    )
    run.add_argument(
        "--dump-tree",
        action="store_true",
        help="print the first draft tree of the first prompt and mode",
    )
    run.add_argument(
        "--dump-index",
        action="store_true",
        help="print the final retrieval index of the first prompt and mode",
    )

    gen = sub.add_parser("gen-corpus", help="write a synthetic token corpus")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--vocab", type=int, default=64)
    gen.add_argument("--count", type=int, default=40)
    gen.add_argument("--length", type=int, default=32)
    gen.add_argument("--repetitiveness", type=float, default=0.5)

    genm = sub.add_parser("gen-model", help="train a Markov model on a corpus")
    genm.add_argument("--out", required=True)
    genm.add_argument("--corpus", required=True)
    genm.add_argument("--vocab", type=int, default=64)
    genm.add_argument("--eos", type=int, default=None, help="default: vocab-1")
    genm.add_argument("--order", type=int, default=2)
    genm.add_argument("--alpha", type=float, default=0.1)
    genm.add_argument("--seed", type=int, default=0)

    check = sub.add_parser("check-report", help="verify report aggregates")
    check.add_argument("report")

    return parser


def _mode_report(results: list[DecodeResult]) -> dict:
    steps = sum(r.metrics.steps for r in results)
    tokens = sum(r.metrics.tokens for r in results)
    hit_steps = sum(r.metrics.retrieval_hit_steps for r in results)
    cdf = rank_histogram(results)
    phase_counters = {p: 0 for p in PHASES}
    for r in results:
        for rec in r.step_records:
            for p in PHASES:
                phase_counters[p] += rec.phase_counters[p]
    return {
        "prompts": len(results),
        "steps": steps,
        "tokens": tokens,
        "mat": tokens / steps,
        "retrieval_success_rate": hit_steps / steps,
        "rank_cdf": [[str(b), count / steps if steps else 0.0] for b, count in cdf],
        "phase_counters": phase_counters,
        "losslessness": {"checked": False, "mismatches": 0},
        "per_prompt": [
            {
                "prompt_index": i,
                "steps": r.metrics.steps,
                "tokens": r.metrics.tokens,
                "mat": r.metrics.mat,
                "retrieval_hit_steps": r.metrics.retrieval_hit_steps,
                "rank_counts": {str(k): v for k, v in r.metrics.rank_counts.items()},
                "phase_counters": {
                    p: sum(rec.phase_counters[p] for rec in r.step_records)
                    for p in PHASES
                },
            }
            for i, r in enumerate(results)
        ],
    }


def _first_divergence(a: list[int], b: list[int]) -> int:
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return min(len(a), len(b))


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        model = load_model_file(args.model)
        corpus = load_corpus(args.corpus)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    modes = [m.strip() for m in args.mode.split(",") if m.strip()]
    for mode in modes:
        if mode not in MODES:
            print(f"error: unknown mode {mode!r}", file=sys.stderr)
            return 2
    for i, seq in enumerate(corpus.sequences):
        for tok in seq:
            if not 0 <= tok < model.vocab.size:
                print(f"error: prompt {i} token {tok} out of vocab", file=sys.stderr)
                return 2

    draft_cfg = DraftConfig(
        top_k=args.top_k,
        capacity=args.capacity,
        m_start=args.m_start,
    )
    dumped = {"tree": not args.dump_tree}

    def run_mode(mode: str) -> list[DecodeResult]:
        results = []
        for i, seq in enumerate(corpus.sequences):
            cfg = DecodeConfig(
                mode=mode,
                max_new_tokens=args.max_new_tokens,
                temperature=args.temperature,
                seed=prompt_seed(args.seed, i),
                draft=draft_cfg,
                last_logit_k=args.last_logit_k,
            )
            observer = None
            if not dumped["tree"] and i == 0:

                def observer(tree, _d=dumped):
                    if not _d["tree"]:
                        print(format_tree(tree))
                        _d["tree"] = True

            results.append(decode(model, seq, cfg, tree_observer=observer))
        return results

    report = {
        "tool_version": __version__,
        "config": {
            "model": args.model,
            "corpus": args.corpus,
            "modes": modes,
            "max_new_tokens": args.max_new_tokens,
            "temperature": args.temperature,
            "seed": args.seed,
            "top_k": args.top_k,
            "capacity": args.capacity,
            "m_start": args.m_start,
            "last_logit_k": args.last_logit_k,
        },
        "modes": {},
    }

    baseline: list[DecodeResult] | None = None
    if args.compare:
        baseline = run_mode("autoregressive")

    exit_code = 0
    for mode in modes:
        if args.compare and mode == "autoregressive" and baseline is not None:
            results = baseline
        else:
            results = run_mode(mode)
        mode_report = _mode_report(results)
        if args.compare:
            mismatches = 0
            for i, (r, base) in enumerate(zip(results, baseline)):
                if r.tokens != base.tokens:
                    mismatches += 1
                    pos = _first_divergence(r.tokens, base.tokens)
                    print(
                        f"losslessness mismatch: mode={mode} prompt={i} "
                        f"first divergence at position {pos}",
                        file=sys.stderr,
                    )
            mode_report["losslessness"] = {"checked": True, "mismatches": mismatches}
            if mismatches:
                exit_code = 3
        report["modes"][mode] = mode_report

        if args.dump_index and mode == modes[0] and mode in ("retrieval_only", "logitspec"):
            index = NGramIndex.build(
                corpus.sequences[0] + results[0].tokens,
                m_max=args.m_start,
            )
            print(index.dump())

    text = json.dumps(report, indent=2, sort_keys=True)
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    else:
        print(text)
    return exit_code


def _cmd_gen_corpus(args: argparse.Namespace) -> int:
    corpus = gen_corpus(
        seed=args.seed,
        vocab_size=args.vocab,
        count=args.count,
        length=args.length,
        repetitiveness=args.repetitiveness,
    )
    save_corpus(args.out, corpus)
    return 0


def _cmd_gen_model(args: argparse.Namespace) -> int:
    from .models import VocabSpec

    try:
        corpus = load_corpus(args.corpus)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    eos = args.eos if args.eos is not None else args.vocab - 1
    model = MarkovTableModel(
        VocabSpec(args.vocab, eos), order=args.order, alpha=args.alpha, seed=args.seed
    )
    model.train(corpus.sequences)
    save_model_file(args.out, model)
    return 0


def _cmd_check_report(args: argparse.Namespace) -> int:
    try:
        with open(args.report, encoding="utf-8") as f:
            report = json.load(f)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    failures = []
    for mode, data in report["modes"].items():
        rows = data["per_prompt"]
        steps = sum(r["steps"] for r in rows)
        tokens = sum(r["tokens"] for r in rows)
        hit_steps = sum(r["retrieval_hit_steps"] for r in rows)
        checks = {
            "prompts": len(rows),
            "steps": steps,
            "tokens": tokens,
            "mat": tokens / steps,
            "retrieval_success_rate": hit_steps / steps,
        }
        for key, expected in checks.items():
            if data[key] != expected:
                failures.append(f"{mode}.{key}: report {data[key]} != recomputed {expected}")
        rank_totals = {str(b): 0 for b in RANK_BUCKETS}
        rank_totals["rest"] = 0
        for r in rows:
            for k, v in r["rank_counts"].items():
                rank_totals[k] += v
        running = 0
        for (bucket, fraction), b in zip(data["rank_cdf"], list(RANK_BUCKETS) + ["rest"]):
            running += rank_totals[str(b)]
            if bucket != str(b) or abs(fraction - running / steps) > 1e-12:
                failures.append(f"{mode}.rank_cdf[{bucket}] inconsistent")
    if failures:
        for msg in failures:
            print(f"check failed: {msg}", file=sys.stderr)
        return 1
    print("report aggregates consistent")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "gen-corpus": _cmd_gen_corpus,
        "gen-model": _cmd_gen_model,
        "check-report": _cmd_check_report,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
