"""Target-model contract and exact reference models.

The decode engine only needs three things from a target model: the
next-token distribution after any committed prefix, batched evaluation of
a draft tree in one call, and rollback of the committed prefix. Both
reference models here (an add-alpha Markov table and a scripted lookup
table) are exact and deterministic, so they double as oracles in tests.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tree import ancestor_rows

__all__ = [
    "VocabSpec",
    "ModelState",
    "Model",
    "MarkovTableModel",
    "ScriptedModel",
    "sample",
    "validate_distribution",
    "load_model_file",
    "save_model_file",
]


@dataclass(frozen=True)
class VocabSpec:
    """Token id space: ids are 0..size-1, with a designated eos id."""

    size: int
    eos: int

    def __post_init__(self) -> None:
        if self.size < 2:
            raise ValueError(f"vocab size must be >= 2, got {self.size}")
        if not 0 <= self.eos < self.size:
            raise ValueError(f"eos {self.eos} out of range [0, {self.size})")


def validate_distribution(probs: np.ndarray, vocab_size: int) -> None:
    """Raise if probs is not a valid probability vector over the vocab."""
    if probs.shape != (vocab_size,):
        raise ValueError(f"distribution shape {probs.shape} != ({vocab_size},)")
    if np.any(probs < 0):
        raise ValueError("distribution has negative entries")
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"distribution sums to {total}, not 1")


@dataclass
class ModelState:
    """Session-local decode state: the committed token prefix.

    The cache slot is opaque to callers; the reference models recompute
    from `committed` and leave it unused.
    """

    committed: list[int] = field(default_factory=list)
    cache: object = None

    def __len__(self) -> int:
        return len(self.committed)


class Model:
    """Base class for target models.

    Subclasses implement `context_dist`; `forward`, `forward_tree` and
    `rollback` are derived from it. Models are immutable after
    construction and shareable across sessions.
    """

    vocab: VocabSpec

    def context_dist(self, context: tuple[int, ...]) -> np.ndarray:
        """Next-token distribution given a full committed context."""
        raise NotImplementedError

    def new_state(self) -> ModelState:
        return ModelState()

    def _check_tokens(self, tokens: list[int]) -> None:
        for t in tokens:
            if not 0 <= t < self.vocab.size:
                raise ValueError(f"token id {t} out of range [0, {self.vocab.size})")

    def forward(self, state: ModelState, new_tokens: list[int]) -> list[np.ndarray]:
        """Consume new_tokens, returning the next-token distribution at
        each position. Advances the state."""
        if not new_tokens:
            raise ValueError("forward requires at least one new token")
        self._check_tokens(new_tokens)
        dists = []
        ctx = list(state.committed)
        for t in new_tokens:
            ctx.append(t)
            dists.append(self.context_dist(tuple(ctx)))
        state.committed = ctx
        return dists

    def forward_tree(
        self,
        state: ModelState,
        draft_ids: list[int],
        mask: np.ndarray,
        position_ids: np.ndarray,
    ) -> list[np.ndarray]:
        """Evaluate every draft-tree position in one call.

        The distribution at each position equals sequential `forward`
        along that position's ancestor path, reconstructed from the
        attention mask. The state is not advanced; the caller commits
        accepted tokens explicitly.
        """
        self._check_tokens(draft_ids)
        past_len = mask.shape[1] - mask.shape[0]
        if past_len != len(state.committed):
            raise ValueError(
                f"mask past_len {past_len} != committed length {len(state.committed)}"
            )
        if len(position_ids) != len(draft_ids):
            raise ValueError("position_ids length != draft_ids length")
        base = tuple(state.committed)
        dists = []
        for rows in ancestor_rows(mask):
            path = tuple(draft_ids[r] for r in rows)
            dists.append(self.context_dist(base + path))
        return dists

    def rollback(self, state: ModelState, keep_len: int) -> ModelState:
        """Truncate the committed prefix to keep_len tokens."""
        if keep_len > len(state.committed):
            raise ValueError(
                f"keep_len {keep_len} > committed length {len(state.committed)}"
            )
        state.committed = state.committed[:keep_len]
        return state


class MarkovTableModel(Model):
    """Order-o add-alpha Markov model over token ids.

    Trained by counting (context, token) transitions in a seed corpus;
    prob(t | ctx) = (count(ctx, t) + alpha) / (sum(count(ctx)) + alpha * V)
    with ctx the last min(o, len) committed tokens. Low-entropy training
    corpora make the model reproduce phrases, which gives the retrieval
    index signal.
    """

    def __init__(
        self,
        vocab: VocabSpec,
        order: int = 2,
        alpha: float = 0.1,
        seed: int = 0,
        counts: dict[tuple[int, ...], dict[int, int]] | None = None,
    ):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {alpha}")
        self.vocab = vocab
        self.order = order
        self.alpha = alpha
        self.seed = seed
        self.counts: dict[tuple[int, ...], dict[int, int]] = counts or {}
        self._dist_cache: dict[tuple[int, ...], np.ndarray] = {}

    def train(self, sequences: list[list[int]]) -> "MarkovTableModel":
        for seq in sequences:
            self._check_tokens(seq)
            for i, tok in enumerate(seq):
                ctx = tuple(seq[max(0, i - self.order) : i])
                self.counts.setdefault(ctx, collections.Counter())[tok] += 1
        self._dist_cache.clear()
        return self

    def context_dist(self, context: tuple[int, ...]) -> np.ndarray:
        ctx = context[-self.order :] if len(context) > self.order else context
        cached = self._dist_cache.get(ctx)
        if cached is not None:
            return cached
        probs = np.full(self.vocab.size, self.alpha, dtype=np.float64)
        for tok, cnt in self.counts.get(ctx, {}).items():
            probs[tok] += cnt
        probs /= probs.sum()
        self._dist_cache[ctx] = probs
        return probs


class ScriptedModel(Model):
    """Lookup-table model: explicit distribution per context, used as a
    unit-test oracle. Contexts not in the table get the default."""

    def __init__(
        self,
        vocab: VocabSpec,
        table: dict[tuple[int, ...], np.ndarray],
        default: np.ndarray,
    ):
        validate_distribution(default, vocab.size)
        for ctx, dist in table.items():
            validate_distribution(dist, vocab.size)
        self.vocab = vocab
        self.table = table
        self.default = default

    def context_dist(self, context: tuple[int, ...]) -> np.ndarray:
        return self.table.get(context, self.default)


def sample(dist: np.ndarray, temperature: float, rng: np.random.Generator) -> int:
    """Sample a token id. Temperature 0 is argmax with lowest-id
    tie-break; temperature 1 is an exact categorical draw."""
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        return int(np.argmax(dist))
    if temperature != 1.0:
        scaled = np.power(dist, 1.0 / temperature)
        scaled /= scaled.sum()
    else:
        scaled = dist
    return int(rng.choice(len(scaled), p=scaled))


def save_model_file(path: str | Path, model: MarkovTableModel) -> None:
    """Write the structured-text model file with explicit counts."""
    lines = [
        f"vocab_size {model.vocab.size}",
        f"eos {model.vocab.eos}",
        f"order {model.order}",
        f"alpha {model.alpha}",
        f"seed {model.seed}",
        "counts",
    ]
    for ctx in sorted(model.counts):
        pairs = ",".join(
            f"{tok}:{cnt}" for tok, cnt in sorted(model.counts[ctx].items())
        )
        lines.append(f"{' '.join(map(str, ctx))} -> {pairs}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model_file(path: str | Path) -> MarkovTableModel:
    """Parse a model file.

    Header fields: vocab_size, eos, order, alpha, seed. Then either a
    `train_corpus_path <relative path>` line or a `counts` section with
    one line per context: "ctx_tokens -> token:count,...".
    """
    path = Path(path)
    header: dict[str, str] = {}
    counts: dict[tuple[int, ...], dict[int, int]] = {}
    corpus_path: Path | None = None
    in_counts = False
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if in_counts:
            if "->" not in line:
                raise ValueError(f"{path}:{lineno}: malformed counts line")
            ctx_part, _, val_part = line.partition("->")
            ctx = tuple(int(t) for t in ctx_part.split())
            per_tok: dict[int, int] = {}
            for pair in val_part.strip().split(","):
                if not pair:
                    continue
                tok, _, cnt = pair.partition(":")
                per_tok[int(tok)] = int(cnt)
            counts[ctx] = per_tok
            continue
        if line == "counts":
            in_counts = True
            continue
        key, _, value = line.partition(" ")
        if not value:
            raise ValueError(f"{path}:{lineno}: malformed header line {line!r}")
        if key == "train_corpus_path":
            corpus_path = path.parent / value.strip()
        else:
            header[key] = value.strip()
    try:
        vocab = VocabSpec(int(header["vocab_size"]), int(header["eos"]))
        model = MarkovTableModel(
            vocab,
            order=int(header.get("order", 2)),
            alpha=float(header.get("alpha", 0.1)),
            seed=int(header.get("seed", 0)),
            counts=counts,
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing model header field {exc}") from exc
    if corpus_path is not None:
        from .corpus import load_corpus

        model.train(load_corpus(corpus_path).sequences)
    return model
