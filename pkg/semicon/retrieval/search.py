from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from semicon.errors import ShapeError
from semicon.utils.logging_utils import ProgressCb
from semicon.workers.pool import parallel_map
from .packing import PackedCode, PackedCodeMatrix, words_per_code

log = logging.getLogger("semicon.search")


@dataclass(frozen=True)
class Ranking:
    indices: np.ndarray    # database positions, best first
    distances: np.ndarray


def hamming(a: PackedCode, b: PackedCode) -> int:
    """popcount(a XOR b) over the packed words of two codes of equal length."""
    if a.k != b.k:
        raise ShapeError(f"hamming: codes differ in length (k={a.k} vs k={b.k})")
    wa = np.asarray(a.words, dtype=np.uint64)
    wb = np.asarray(b.words, dtype=np.uint64)
    if wa.shape != wb.shape or wa.shape != (words_per_code(a.k),):
        raise ShapeError(f"hamming: {a.k}-bit codes packed as {wa.shape} and {wb.shape} words")
    return int(np.bitwise_count(wa ^ wb).sum())


def hamming_distances(query: np.ndarray, db: PackedCodeMatrix) -> np.ndarray:
    query = np.asarray(query, dtype=np.uint64)
    if query.shape != (db.words.shape[1],):
        raise ShapeError(f"query of {query.shape} words against {db.words.shape[1]}-word codes")
    return np.bitwise_count(db.words ^ query).sum(axis=1, dtype=np.int64)


def search_topk(query: PackedCode, db: PackedCodeMatrix, K: int) -> Ranking:
    """Top-K by Hamming distance; equal distances keep ascending database order."""
    if query.k != db.k:
        raise ShapeError(f"search_topk: query code has k={query.k}, database codes k={db.k}")
    if db.count == 0:
        raise ValueError("search_topk: empty database")
    if not 1 <= K <= db.count:
        raise ValueError(f"search_topk: K={K} outside 1..{db.count}")
    d = hamming_distances(query.words, db)
    order = np.argsort(d, kind="stable")[:K]
    return Ranking(order, d[order])


def search_many(
    queries: PackedCodeMatrix,
    db: PackedCodeMatrix,
    K: Optional[int] = None,
    progress_cb: ProgressCb = None,
) -> List[Ranking]:
    """search_topk for every query, in query order; K defaults to the full ranking."""
    if queries.k != db.k:
        raise ShapeError(f"query codes have k={queries.k}, database codes k={db.k}")
    K = db.count if K is None else K
    log.debug("Searching %d queries against %d codes (K=%d)", queries.count, db.count, K)
    return parallel_map(lambda i: search_topk(queries.row(i), db, K), range(queries.count), progress_cb)
