"""Draft-tree layout: flattened ids, block-diagonal mask, position ids.

Sibling draft sequences all hang directly under the pending next token
(row 0). Each sequence gets a lower-triangular block on the mask
diagonal, so sequences are mutually invisible while every row sees the
past context and the root.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TreeStructureError",
    "DraftTree",
    "prepare_attention_inputs",
    "ancestor_rows",
    "paths_from_mask",
    "format_tree",
]


class TreeStructureError(ValueError):
    """The attention mask is not a valid block-diagonal draft tree."""


@dataclass
class DraftTree:
    """Verification payload for one decode step.

    draft_ids[0] is the pending next token; the remaining ids are the
    concatenated draft sequences, with per-sequence lengths in seq_lens.
    """

    past_len: int
    draft_ids: list[int]
    seq_lens: list[int]
    mask: np.ndarray
    position_ids: np.ndarray
    origins: list[str] = field(default_factory=list)

    @property
    def seq_len(self) -> int:
        return len(self.draft_ids)

    @property
    def draft_count(self) -> int:
        return len(self.draft_ids) - 1

    def sequence_offsets(self) -> list[int]:
        """Flat index of the first token of each draft sequence."""
        offsets = []
        idx = 1
        for m in self.seq_lens:
            offsets.append(idx)
            idx += m
        return offsets


def prepare_attention_inputs(
    past_len: int,
    next_token: int,
    sequences: list[list[int]],
    origins: list[str] | None = None,
) -> DraftTree:
    """Flatten draft sequences into ids, mask and position ids.

    Row 0 (the next token) sees columns [0, past_len]; every draft row
    additionally sees its own sequence's lower-triangular prefix. An
    empty sequence list yields the degenerate single-row tree.
    """
    if past_len < 0:
        raise ValueError(f"past_len must be >= 0, got {past_len}")
    for seq in sequences:
        if not seq:
            raise ValueError("draft sequences must be non-empty")
    seq_lens = [len(s) for s in sequences]
    seq_len = 1 + sum(seq_lens)

    draft_ids = [next_token] + [tok for seq in sequences for tok in seq]
    mask = np.zeros((seq_len, past_len + seq_len), dtype=np.int8)
    mask[:, : past_len + 1] = 1
    position_ids = np.zeros(seq_len, dtype=np.int64)

    idx = 1
    for seq in sequences:
        l = len(seq)
        mask[idx : idx + l, idx + past_len : idx + past_len + l] = np.tril(
            np.ones((l, l), dtype=np.int8)
        )
        position_ids[idx : idx + l] = np.arange(1, l + 1)
        idx += l
    position_ids += past_len

    return DraftTree(
        past_len=past_len,
        draft_ids=draft_ids,
        seq_lens=seq_lens,
        mask=mask,
        position_ids=position_ids,
        origins=list(origins) if origins is not None else ["" for _ in sequences],
    )


def ancestor_rows(mask: np.ndarray) -> list[list[int]]:
    """Per-row ancestor path (row indices, root first, self last).

    Validates the block-diagonal structure: every row must see the full
    past plus the root, and its own-block visibility must be a contiguous
    run ending at itself.
    """
    seq_len, total = mask.shape
    past_len = total - seq_len
    if past_len < 0:
        raise TreeStructureError("mask has fewer columns than rows")
    if not np.all(mask[:, : past_len + 1] == 1):
        raise TreeStructureError("a row does not see the full past context + root")

    paths: list[list[int]] = [[0]]
    if np.any(mask[0, past_len + 1 :]):
        raise TreeStructureError("root row sees a draft column")
    block_start = None
    for r in range(1, seq_len):
        visible = np.flatnonzero(mask[r, past_len + 1 :]) + 1
        if visible.size == 0 or visible[-1] != r:
            raise TreeStructureError(f"row {r} does not see itself")
        s = int(visible[0])
        if not np.array_equal(visible, np.arange(s, r + 1)):
            raise TreeStructureError(f"row {r} visibility is not contiguous")
        if s == r:
            block_start = r
        elif s != block_start:
            raise TreeStructureError(f"row {r} sees a non-ancestor row {s}")
        paths.append([0] + list(range(s, r + 1)))
    return paths


def paths_from_mask(tree: DraftTree) -> list[list[int]]:
    """Root-to-leaf token paths reconstructed from mask visibility alone.

    Inverse of prepare_attention_inputs: leaves are the last rows of each
    diagonal block; a degenerate tree yields the single path [root].
    """
    paths = ancestor_rows(tree.mask)
    if len(paths) == 1:
        return [[tree.draft_ids[0]]]
    leaves = []
    for r in range(1, len(paths)):
        is_leaf = r + 1 >= len(paths) or len(paths[r + 1]) <= len(paths[r])
        if is_leaf:
            leaves.append(paths[r])
    return [[tree.draft_ids[i] for i in rows] for rows in leaves]


def format_tree(tree: DraftTree) -> str:
    """Debug dump: header line, draft ids, position ids, then the full
    mask as rows of 0/1 characters."""
    lines = [f"{tree.past_len} {tree.seq_len}"]
    lines.append(" ".join(map(str, tree.draft_ids)))
    lines.append(" ".join(map(str, tree.position_ids.tolist())))
    for row in tree.mask:
        lines.append("".join(map(str, row.tolist())))
    return "\n".join(lines)
