"""Chunk labels: the subset of file chunks a peer currently holds.

A label over ``n`` chunks is stored as an ``n``-bit mask, chunk ``i`` being
bit ``i - 1``. The position of a label inside every state vector is its
mask value, so ``enumerate_labels(n)[m].mask == m``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator

N_MAX = 16

_LABEL_RE = re.compile(r"^\s*\{\s*([0-9,\s]*)\}\s*$")


class LabelError(ValueError):
    """Raised for labels outside the chunk set or mixed chunk counts."""


def _check_n(n: int) -> None:
    if not isinstance(n, int) or not 1 <= n <= N_MAX:
        raise LabelError(f"chunk count must be an integer in [1, {N_MAX}], got {n!r}")


@dataclass(frozen=True, order=True)
class ChunkLabel:
    """A set of chunk indices drawn from ``{1, ..., n}``."""

    mask: int
    n: int

    def __post_init__(self) -> None:
        _check_n(self.n)
        if not 0 <= self.mask < (1 << self.n):
            raise LabelError(f"mask {self.mask} does not fit in {self.n} chunks")

    @classmethod
    def of(cls, chunks: Iterable[int], n: int) -> "ChunkLabel":
        mask = 0
        for c in chunks:
            if not 1 <= c <= n:
                raise LabelError(f"chunk index {c} outside 1..{n}")
            mask |= 1 << (c - 1)
        return cls(mask, n)

    @classmethod
    def empty(cls, n: int) -> "ChunkLabel":
        return cls(0, n)

    @classmethod
    def full(cls, n: int) -> "ChunkLabel":
        return cls((1 << n) - 1, n)

    @classmethod
    def parse(cls, text: str, n: int) -> "ChunkLabel":
        """Parse the textual form ``"{1,3}"`` (``"{}"`` is the empty label)."""
        m = _LABEL_RE.match(text)
        if m is None:
            raise LabelError(f"cannot parse label {text!r}; expected e.g. '{{1,3}}'")
        body = m.group(1).strip()
        if not body:
            return cls(0, n)
        try:
            chunks = [int(tok) for tok in body.split(",")]
        except ValueError:
            raise LabelError(f"cannot parse label {text!r}") from None
        return cls.of(chunks, n)

    def chunks(self) -> tuple[int, ...]:
        return tuple(i + 1 for i in range(self.n) if self.mask >> i & 1)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __iter__(self) -> Iterator[int]:
        return iter(self.chunks())

    def __contains__(self, chunk: object) -> bool:
        return isinstance(chunk, int) and 1 <= chunk <= self.n and bool(self.mask >> (chunk - 1) & 1)

    def __str__(self) -> str:
        return "{" + ",".join(str(c) for c in self.chunks()) + "}"

    def __repr__(self) -> str:
        return f"ChunkLabel({self}, n={self.n})"


def _same_n(a: ChunkLabel, b: ChunkLabel) -> None:
    if a.n != b.n:
        raise LabelError(f"labels over different chunk counts ({a.n} vs {b.n})")


def is_subset(a: ChunkLabel, b: ChunkLabel) -> bool:
    """Non-strict inclusion ``a ⊆ b``."""
    _same_n(a, b)
    return a.mask & ~b.mask == 0


def covers(a: ChunkLabel, a_prime: ChunkLabel) -> bool:
    """True iff ``a_prime`` is ``a`` plus exactly one chunk."""
    _same_n(a, a_prime)
    return mask_covers(a.mask, a_prime.mask)


def relates(a: ChunkLabel, b: ChunkLabel) -> bool:
    """True iff the labels are comparable; incomparable labels can swap."""
    _same_n(a, b)
    return mask_relates(a.mask, b.mask)


def enumerate_labels(n: int) -> list[ChunkLabel]:
    _check_n(n)
    return [ChunkLabel(m, n) for m in range(1 << n)]


def format_label(mask: int, n: int) -> str:
    return str(ChunkLabel(mask, n))


def parse_label(text: str, n: int) -> int:
    """Parse a label string straight to its mask."""
    return ChunkLabel.parse(text, n).mask


# Mask-level helpers used on hot paths (no validation).

def mask_subset(a: int, b: int) -> bool:
    return a & ~b == 0


def mask_covers(a: int, b: int) -> bool:
    return a & ~b == 0 and (b & ~a).bit_count() == 1


def mask_relates(a: int, b: int) -> bool:
    return a & ~b == 0 or b & ~a == 0


def popcount(mask: int) -> int:
    return mask.bit_count()


def bits(mask: int) -> Iterator[int]:
    """Yield the single-bit masks set in ``mask``, lowest first."""
    while mask:
        low = mask & -mask
        yield low
        mask ^= low


def supersets(mask: int, n: int) -> Iterator[int]:
    """All masks ``C`` over ``n`` chunks with ``mask ⊆ C``, including ``mask``."""
    free = ((1 << n) - 1) & ~mask
    sub = free
    while True:
        yield mask | sub
        if sub == 0:
            return
        sub = (sub - 1) & free
