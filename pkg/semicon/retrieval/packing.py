# semicon/retrieval/packing.py
# ±1 codes stored as 64-bit words, least-significant bit first: bit j of a code
# lives in word j // 64 at position j % 64, -1 -> 0, +1 -> 1, pad bits zero.

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from semicon.errors import ShapeError

WORD_BITS = 64
_SHIFTS = np.arange(WORD_BITS, dtype=np.uint64)


def words_per_code(k: int) -> int:
    return (k + WORD_BITS - 1) // WORD_BITS


@dataclass(frozen=True)
class PackedCode:
    """One packed code with its bit length."""

    k: int
    words: np.ndarray


@dataclass(frozen=True)
class PackedCodeMatrix:
    k: int
    words: np.ndarray                        # count × ceil(k/64), uint64
    labels: np.ndarray                       # count, class identifiers
    layout: Tuple[int, ...] = field(default=())   # global then local code lengths

    def __post_init__(self) -> None:
        if self.words.ndim != 2 or self.words.shape[1] != words_per_code(self.k):
            raise ShapeError(f"packed words {self.words.shape} do not hold {self.k}-bit codes")
        if len(self.labels) != self.count:
            raise ShapeError(f"{len(self.labels)} labels for {self.count} codes")
        if self.layout and sum(self.layout) != self.k:
            raise ShapeError(f"layout {self.layout} does not sum to k={self.k}")

    @property
    def count(self) -> int:
        return self.words.shape[0]

    @property
    def lengths(self) -> Tuple[int, ...]:
        return self.layout or (self.k,)

    def row(self, i: int) -> PackedCode:
        return PackedCode(self.k, self.words[i])


def pack_codes(
    Z,
    labels: Optional[Sequence[int]] = None,
    layout: Sequence[int] = (),
) -> PackedCodeMatrix:
    Z = np.asarray(Z)
    if Z.ndim != 2:
        raise ShapeError(f"pack_codes expects a count×k matrix, got {Z.shape}")
    if not np.all((Z == 1) | (Z == -1)):
        raise ValueError("pack_codes: codes must contain only -1 and +1")
    count, k = Z.shape
    n_words = words_per_code(k)
    bits = np.zeros((count, n_words * WORD_BITS), dtype=np.uint64)
    bits[:, :k] = Z == 1
    words = np.bitwise_or.reduce(bits.reshape(count, n_words, WORD_BITS) << _SHIFTS, axis=-1)
    labels = np.zeros(count, dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64)
    return PackedCodeMatrix(k, words.astype(np.uint64), labels, tuple(int(n) for n in layout))


def unpack_codes(packed: PackedCodeMatrix) -> np.ndarray:
    bits = (packed.words[..., None] >> _SHIFTS) & np.uint64(1)
    flat = bits.reshape(packed.count, packed.words.shape[1] * WORD_BITS)[:, : packed.k]
    return np.where(flat == 1, 1, -1).astype(np.int8)
