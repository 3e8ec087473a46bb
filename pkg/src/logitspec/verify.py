"""Draft-tree verification: greedy longest-prefix and lossless stochastic.

Retrieval drafts are deterministic proposals (one-hot q), so the
stochastic acceptance rule reduces to accepting token x with probability
p[x] and, on rejection, zeroing x out of p and renormalizing. Applying
that rule across siblings and then linearly within the chosen sequence
preserves the target distribution exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tree import DraftTree

__all__ = [
    "VerifyOutcome",
    "acceptance_prob",
    "residual",
    "verify_greedy",
    "verify_stochastic",
]


@dataclass
class VerifyOutcome:
    """Result of one verification: accepted draft tokens plus the bonus
    token, and the distribution that produced the bonus (retained as the
    next step's last logit). At least one token is always emitted."""

    accepted: list[int]
    bonus: int
    next_dist: np.ndarray
    accepted_seq_index: int | None = None


def acceptance_prob(p: np.ndarray, q: np.ndarray, x: int) -> float:
    """Acceptance rate for draft token x proposed from q, verified by p:
    1 when p[x] >= q[x], else p[x] / q[x]."""
    if q[x] <= 0:
        raise ValueError(f"draft token {x} has zero proposal probability")
    if p[x] >= q[x]:
        return 1.0
    return float(p[x] / q[x])


def residual(p: np.ndarray, q: np.ndarray) -> np.ndarray | None:
    """Rejection residual norm(max(0, p - q)), or None when it is
    identically zero (p == q; resample from p instead)."""
    r = np.maximum(p - q, 0.0)
    total = r.sum()
    if total <= 0:
        return None
    return r / total


def _one_hot_residual(p: np.ndarray, x: int) -> np.ndarray | None:
    # residual(p, one_hot(x)) without materializing the one-hot vector
    r = p.copy()
    r[x] = 0.0
    total = r.sum()
    if total <= 0:
        return None
    return r / total


def verify_greedy(tree: DraftTree, dists: list[np.ndarray]) -> VerifyOutcome:
    """Accept the longest draft prefix matching the argmax chain.

    Ties between sequences go to the lowest sequence index; total
    rejection still emits the argmax after the pending token as bonus.
    """
    g0 = int(np.argmax(dists[0]))
    best_len = 0
    best_seq: int | None = None
    best_pos = 0  # flat index of the last accepted position
    offsets = tree.sequence_offsets()
    for j, off in enumerate(offsets):
        m = tree.seq_lens[j]
        acc = 0
        pos = 0
        for t in range(m):
            tok = tree.draft_ids[off + t]
            if tok != int(np.argmax(dists[pos])):
                break
            acc = t + 1
            pos = off + t
        if acc > best_len:
            best_len, best_seq, best_pos = acc, j, pos
    if best_len == 0:
        return VerifyOutcome(accepted=[], bonus=g0, next_dist=dists[0])
    off = offsets[best_seq]
    accepted = tree.draft_ids[off : off + best_len]
    return VerifyOutcome(
        accepted=accepted,
        bonus=int(np.argmax(dists[best_pos])),
        next_dist=dists[best_pos],
        accepted_seq_index=best_seq,
    )


def verify_stochastic(
    tree: DraftTree, dists: list[np.ndarray], rng: np.random.Generator
) -> VerifyOutcome:
    """Lossless stochastic verification over one-hot draft proposals.

    Sibling stage: walk the first token of each sequence with a working
    distribution starting at dists[0]; accept with its current
    probability, otherwise fold it into the residual and move on. After a
    sibling is accepted the walk continues linearly inside that sequence
    with the same accept/residual rule.
    """
    offsets = tree.sequence_offsets()
    work = dists[0]
    for j, off in enumerate(offsets):
        first = tree.draft_ids[off]
        if rng.random() >= work[first]:
            rejected = _one_hot_residual(work, first)
            if rejected is None:
                # work is one-hot at first: acceptance prob was 1, so
                # this branch is unreachable for valid inputs
                raise AssertionError("rejected a certain token")
            work = rejected
            continue
        # sibling accepted; continue linearly within sequence j
        accepted = [first]
        pos = off
        for t in range(1, tree.seq_lens[j]):
            p = dists[pos]
            tok = tree.draft_ids[off + t]
            if rng.random() < p[tok]:
                accepted.append(tok)
                pos = off + t
                continue
            res = _one_hot_residual(p, tok)
            next_dist = p if res is None else res
            return VerifyOutcome(
                accepted=accepted,
                bonus=int(rng.choice(len(next_dist), p=next_dist)),
                next_dist=next_dist,
                accepted_seq_index=j,
            )
        next_dist = dists[off + tree.seq_lens[j] - 1]
        return VerifyOutcome(
            accepted=accepted,
            bonus=int(rng.choice(len(next_dist), p=next_dist)),
            next_dist=next_dist,
            accepted_seq_index=j,
        )
    return VerifyOutcome(
        accepted=[],
        bonus=int(rng.choice(len(work), p=work)),
        next_dist=work,
    )
