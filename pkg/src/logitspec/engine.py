"""The decode loop and its metrics.

Per step: build drafts around the pending next token, evaluate the draft
tree in one model call, verify, commit the pending token plus accepted
drafts, update the retrieval index, and carry the bonus token (with the
distribution that produced it) into the next step as the new pending
token / last logit.

Modes:
  autoregressive  no drafts; one token per forward (the baseline).
  last_logit      top-k last-logit entries as single-token sibling
                  guesses at the next-next token (accepted length 0 or 1
                  per step, so at most 2 tokens per forward).
  retrieval_only  next-token retrieval sequences only.
  logitspec       retrieval for the next token and for each speculated
                  next-next candidate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .drafting import DraftConfig, DraftSet, build_draft, speculate_next_next
from .models import Model, sample
from .ngram_index import NGramIndex
from .tree import prepare_attention_inputs
from .verify import verify_greedy, verify_stochastic

__all__ = [
    "MODES",
    "DecodeConfig",
    "StepRecord",
    "DecodeMetrics",
    "DecodeResult",
    "decode",
    "mat",
    "retrieval_success_rate",
    "rank_histogram",
    "RANK_BUCKETS",
]

MODES = ("autoregressive", "last_logit", "retrieval_only", "logitspec")
RETRIEVAL_MODES = ("retrieval_only", "logitspec")

# cumulative rank buckets for the next-next-token statistic: a step falls
# in bucket b when the realized token's 0-based rank in the last logit
# is < b; "rest" catches everything beyond the top-60 window
RANK_BUCKETS = (1, 2, 4, 8, 16, 32, 60)

PHASES = ("retrieve", "prepare", "forward", "verify", "update")


@dataclass(frozen=True)
class DecodeConfig:
    mode: str = "logitspec"
    max_new_tokens: int = 128
    temperature: float = 0.0
    seed: int = 0
    draft: DraftConfig = field(default_factory=DraftConfig)
    last_logit_k: int = 60

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass
class StepRecord:
    accepted_len: int
    draft_size: int
    retrieval_hit: bool
    used_m: int
    next_next_rank: int | None
    phase_counters: dict[str, int]


@dataclass
class DecodeMetrics:
    steps: int
    tokens: int
    mat: float
    retrieval_hit_steps: int
    rank_counts: dict[int | str, int]


@dataclass
class DecodeResult:
    tokens: list[int]
    metrics: DecodeMetrics
    step_records: list[StepRecord]
    mode: str


def _token_rank(dist: np.ndarray, token: int) -> int:
    """0-based rank of token in dist sorted descending, ties by lower id."""
    p = dist[token]
    return int(np.sum(dist > p) + np.sum((dist == p) & (np.arange(len(dist)) < token)))


def _build_step_draft(
    cfg: DecodeConfig,
    index: NGramIndex | None,
    context: list[int],
    pending: int,
    last_dist: np.ndarray,
) -> DraftSet:
    if cfg.mode == "autoregressive":
        return DraftSet()
    if cfg.mode == "last_logit":
        cands = speculate_next_next(last_dist, pending, cfg.last_logit_k)
        return DraftSet(
            sequences=[[tok] for tok, _ in cands.candidates],
            origins=[f"cand:{rank}" for _, rank in cands.candidates],
        )
    assert index is not None
    if cfg.mode == "retrieval_only":
        no_cand = DraftConfig(
            top_k=0,
            capacity=cfg.draft.capacity,
            m_start=cfg.draft.m_start,
            next_token_value_len=cfg.draft.next_token_value_len,
            max_matches=cfg.draft.max_matches,
        )
        return build_draft(index, context, pending, last_dist, no_cand)
    return build_draft(index, context, pending, last_dist, cfg.draft)


def decode(
    model: Model,
    prompt: list[int],
    cfg: DecodeConfig,
    tree_observer=None,
) -> DecodeResult:
    """Generate up to max_new_tokens after prompt, stopping at eos.

    Identical (model, prompt, cfg) always produces an identical result;
    at temperature 0 every mode reproduces plain argmax decoding exactly.
    """
    if not prompt:
        raise ValueError("prompt must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    eos = model.vocab.eos

    state = model.new_state()
    prefill = model.forward(state, list(prompt))
    last_dist = prefill[-1]
    pending = sample(last_dist, cfg.temperature, rng)

    index: NGramIndex | None = None
    if cfg.mode in RETRIEVAL_MODES:
        index = NGramIndex.build(
            list(prompt),
            m_max=cfg.draft.m_start,
            value_len=cfg.draft.next_token_value_len,
        )

    generated: list[int] = []
    records: list[StepRecord] = []
    while True:
        context = list(prompt) + generated
        draft = _build_step_draft(cfg, index, context, pending, last_dist)
        tree = prepare_attention_inputs(len(state), pending, draft.sequences, draft.origins)
        if tree_observer is not None:
            tree_observer(tree)
        dists = model.forward_tree(state, tree.draft_ids, tree.mask, tree.position_ids)
        if cfg.temperature == 0:
            outcome = verify_greedy(tree, dists)
        else:
            outcome = verify_stochastic(tree, dists, rng)

        emitted = [pending] + outcome.accepted
        emitted = emitted[: cfg.max_new_tokens - len(generated)]
        if eos in emitted:
            emitted = emitted[: emitted.index(eos) + 1]
        model.forward(state, emitted)  # commit; rejected drafts were never applied
        generated.extend(emitted)
        if index is not None:
            index.extend(emitted)

        realized_next_next = outcome.accepted[0] if outcome.accepted else outcome.bonus
        records.append(
            StepRecord(
                accepted_len=len(emitted) - 1,
                draft_size=tree.draft_count,
                retrieval_hit=draft.hits > 0,
                used_m=draft.used_m,
                next_next_rank=_token_rank(last_dist, realized_next_next),
                phase_counters={
                    "retrieve": draft.queries,
                    "prepare": 1,
                    "forward": tree.seq_len,
                    "verify": len(outcome.accepted) + 1,
                    "update": len(emitted),
                },
            )
        )
        if emitted[-1] == eos or len(generated) >= cfg.max_new_tokens:
            break
        pending = outcome.bonus
        last_dist = outcome.next_dist

    rank_counts: dict[int | str, int] = {b: 0 for b in RANK_BUCKETS}
    rank_counts["rest"] = 0
    for rec in records:
        _bucket_rank(rank_counts, rec.next_next_rank)
    metrics = DecodeMetrics(
        steps=len(records),
        tokens=len(generated),
        mat=len(generated) / len(records),
        retrieval_hit_steps=sum(1 for r in records if r.retrieval_hit),
        rank_counts=rank_counts,
    )
    return DecodeResult(tokens=generated, metrics=metrics, step_records=records, mode=cfg.mode)


def _bucket_rank(counts: dict[int | str, int], rank: int | None) -> None:
    if rank is None:
        return
    for b in RANK_BUCKETS:
        if rank < b:
            counts[b] += 1
            return
    counts["rest"] += 1


def mat(result: DecodeResult) -> float:
    """Mean accepted tokens per decoding step: generated tokens divided
    by verification forwards (prefill excluded)."""
    if not result.step_records:
        raise ValueError("result has no decode steps")
    return result.metrics.tokens / result.metrics.steps


def retrieval_success_rate(result: DecodeResult) -> float:
    """Fraction of steps where at least one retrieval query matched."""
    if not result.step_records:
        raise ValueError("result has no decode steps")
    return result.metrics.retrieval_hit_steps / result.metrics.steps


def rank_histogram(results: list[DecodeResult]) -> list[tuple[int | str, int]]:
    """Cumulative next-next-token rank counts over all steps, bucketed by
    the top-1/2/4/.../60 windows plus a catch-all."""
    counts: dict[int | str, int] = {b: 0 for b in RANK_BUCKETS}
    counts["rest"] = 0
    for result in results:
        for rec in result.step_records:
            _bucket_rank(counts, rec.next_next_rank)
    cumulative: list[tuple[int | str, int]] = []
    running = 0
    for b in RANK_BUCKETS:
        running += counts[b]
        cumulative.append((b, running))
    cumulative.append(("rest", running + counts["rest"]))
    return cumulative
