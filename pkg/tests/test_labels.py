import itertools

import pytest
from hypothesis import given, strategies as st

from p2pswarm.labels import (
    N_MAX,
    ChunkLabel,
    LabelError,
    covers,
    enumerate_labels,
    format_label,
    is_subset,
    parse_label,
    relates,
    supersets,
)


def L(chunks, n=3):
    return ChunkLabel.of(chunks, n)


def test_subset_examples():
    assert is_subset(L({1}), L({1, 2}))
    assert is_subset(ChunkLabel.empty(3), ChunkLabel.empty(3))
    assert not is_subset(L({1, 3}), L({1, 2}))


def test_covers_examples():
    assert covers(L({1}), L({1, 2}))
    assert not covers(L({1}), L({1, 2, 3}))
    assert not covers(L({1}), L({2}))


def test_relates_examples():
    assert not relates(L({1}), L({2}))
    assert relates(L({1}), L({1, 2}))
    for b in enumerate_labels(3):
        assert relates(ChunkLabel.empty(3), b)


def test_mismatched_n_rejected():
    with pytest.raises(LabelError):
        is_subset(L({1}, 2), L({1}, 3))


def test_enumeration_order():
    assert [str(a) for a in enumerate_labels(1)] == ["{}", "{1}"]
    assert [str(a) for a in enumerate_labels(2)] == ["{}", "{1}", "{2}", "{1,2}"]
    labels = enumerate_labels(3)
    assert len(labels) == 8
    assert [a.mask for a in labels] == list(range(8))


@pytest.mark.parametrize("n", [0, N_MAX + 1, 2.5])
def test_enumeration_range(n):
    with pytest.raises(LabelError):
        enumerate_labels(n)


def test_chunk_index_validated():
    with pytest.raises(LabelError):
        ChunkLabel.of({4}, 3)
    with pytest.raises(LabelError):
        ChunkLabel.of({0}, 3)


@pytest.mark.parametrize("n", range(1, 7))
def test_exhaustive_relations(n):
    labels = enumerate_labels(n)
    for a, b in itertools.product(labels, repeat=2):
        if covers(a, b):
            assert is_subset(a, b) and len(b) - len(a) == 1
        assert relates(a, b) == relates(b, a)
        if not relates(a, b):
            assert a.mask & ~b.mask and b.mask & ~a.mask


@given(st.integers(1, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, (1 << n) - 1))))
def test_text_roundtrip(nm):
    n, m = nm
    assert parse_label(format_label(m, n), n) == m


@pytest.mark.parametrize("text", ["{1,,2}", "1,2", "{a}", "{4}", "{0}"])
def test_parse_errors(text):
    with pytest.raises(LabelError):
        parse_label(text, 3)


def test_parse_tolerates_spaces_and_order():
    assert parse_label("{ 3, 1 }", 3) == 0b101
    assert parse_label("{}", 2) == 0


def test_supersets_include_self():
    assert sorted(supersets(0b001, 3)) == [0b001, 0b011, 0b101, 0b111]


def test_label_dunder():
    a = L({1, 3})
    assert a.chunks() == (1, 3)
    assert 3 in a and 2 not in a
    assert list(a) == [1, 3]
    assert ChunkLabel.full(3).mask == 7
