from __future__ import annotations

import numpy as np
import pytest

from logitspec import NGramIndex

from conftest import naive_fallback, naive_match

A, B, C, D = 0, 1, 2, 3


def test_build_records_offsets_past_occurrences():
    index = NGramIndex.build([A, B, C, A, B, D], m_max=2)
    assert index.table[(A, B)] == [2, 5]
    assert index.table[(C,)] == [3]


def test_build_empty_source():
    index = NGramIndex.build([], m_max=3)
    assert index.table == {}


def test_build_single_token_no_continuation():
    index = NGramIndex.build([A], m_max=3)
    assert index.table[(A,)] == [1]
    assert not index.match([A])  # offset points past the end


def test_extend_equals_rebuild_simple():
    left = NGramIndex.build([A, B], m_max=2).extend([C])
    right = NGramIndex.build([A, B, C], m_max=2)
    assert left.table == right.table
    assert left.source == right.source


def test_extend_empty_is_noop():
    index = NGramIndex.build([A, B, C], m_max=2)
    before = dict(index.table)
    index.extend([])
    assert index.table == before


def test_extend_random_vs_rebuild_oracle():
    rng = np.random.default_rng(3)
    for _ in range(500):
        chunks = [
            rng.integers(0, 8, size=rng.integers(0, 6)).tolist()
            for _ in range(rng.integers(1, 5))
        ]
        incremental = NGramIndex(m_max=3, value_len=4)
        for chunk in chunks:
            incremental.extend(chunk)
        rebuilt = NGramIndex.build(sum(chunks, []), m_max=3, value_len=4)
        query = rng.integers(0, 8, size=rng.integers(1, 4)).tolist()
        assert (
            incremental.match(query).continuations
            == rebuilt.match(query).continuations
        )


def test_match_figure_scenario_next_token_only():
    # "the area of the triangle": the=2 area=3 of=4 the=2 triangle=5
    index = NGramIndex.build([2, 3, 4, 2, 5], m_max=2)
    result = index.match([2])
    # most recent occurrence first: "triangle", then "area of the triangle"
    assert result.continuations == [[5], [3, 4, 2, 5]]


def test_match_figure_scenario_two_gram():
    index = NGramIndex.build([2, 3, 4, 2, 5], m_max=2)
    assert index.match([2, 3]).continuations == [[4, 2, 5]]


def test_match_absent_query():
    index = NGramIndex.build([A, B, C], m_max=2)
    assert index.match([D]).continuations == []


def test_match_query_too_long():
    index = NGramIndex.build([A, B, C], m_max=2)
    with pytest.raises(ValueError):
        index.match([A, B, C])


def test_fallback_decrements_m():
    # suffix ends (X, Y, Z) = (1, 2, 3); only (2, 3) occurs earlier
    index = NGramIndex.build([2, 3, 0, 1, 2, 3], m_max=3)
    result, used_m = index.match_with_fallback([1, 2, 3], 3)
    assert used_m == 2
    assert result.continuations == [[0, 1, 2, 3]]


def test_fallback_all_misses():
    index = NGramIndex.build([A, A, A], m_max=3)
    result, used_m = index.match_with_fallback([B, C, D], 3)
    assert used_m == 0
    assert not result


def test_fallback_direct_hit_keeps_m_start():
    index = NGramIndex.build([1, 2, 3, 4, 1, 2, 3], m_max=3)
    result, used_m = index.match_with_fallback([0, 1, 2, 3], 3)
    assert used_m == 3
    assert result.continuations == [[4, 1, 2, 3]]


def test_oracle_equivalence_random():
    rng = np.random.default_rng(17)
    for _ in range(1000):
        source = rng.integers(0, 16, size=rng.integers(0, 201)).tolist()
        index = NGramIndex.build(source, m_max=3, value_len=5)
        query = rng.integers(0, 16, size=rng.integers(1, 4)).tolist()
        assert index.match(query).continuations == naive_match(source, query, 5)
        suffix = rng.integers(0, 16, size=rng.integers(3, 8)).tolist()
        got, got_m = index.match_with_fallback(suffix, 3)
        want, want_m = naive_fallback(source, suffix, 3, 5)
        assert (got.continuations, got_m) == (want, want_m)


def test_continuations_are_verbatim_substrings():
    rng = np.random.default_rng(5)
    for _ in range(200):
        source = rng.integers(0, 6, size=50).tolist()
        index = NGramIndex.build(source, m_max=2, value_len=4)
        query = rng.integers(0, 6, size=2).tolist()
        for cont in index.match(query, max_matches=10).continuations:
            joined = query + cont
            assert any(
                source[i : i + len(joined)] == joined
                for i in range(len(source) - len(joined) + 1)
            )


def test_match_probe_count_bounded():
    # lookup cost must not depend on source length
    for n in (50, 5000):
        index = NGramIndex.build(list(np.random.default_rng(1).integers(0, 4, n)), m_max=3)
        index.probe_count = 0
        index.match([1, 2])
        assert index.probe_count == 1
        index.probe_count = 0
        index.match_with_fallback([0, 1, 2], 3)
        assert index.probe_count <= 3


def test_dump_format():
    index = NGramIndex.build([A, B, A, B], m_max=2)
    lines = index.dump().splitlines()
    assert "0 | 1,3" in lines
    assert "0 1 | 2,4" in lines
    assert "1 0 | 3" in lines
