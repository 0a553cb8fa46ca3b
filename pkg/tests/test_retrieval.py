import numpy as np
import pytest

from semicon.errors import ShapeError
from semicon.retrieval.packing import PackedCode, PackedCodeMatrix, pack_codes, unpack_codes, words_per_code
from semicon.retrieval.search import hamming, hamming_distances, search_many, search_topk


def _random_codes(rng, n, k):
    return np.where(rng.random((n, k)) < 0.5, -1, 1)


def test_pack_is_least_significant_bit_first():
    packed = pack_codes([[1, -1, 1, -1]])
    assert packed.words.dtype == np.uint64
    assert packed.words.tolist() == [[0b0101]]


def test_pack_full_word_and_padding():
    assert pack_codes(np.ones((1, 64))).words.tolist() == [[2**64 - 1]]
    packed = pack_codes(np.ones((1, 65)))
    assert packed.words.tolist() == [[2**64 - 1, 1]]
    assert words_per_code(48) == 1 and words_per_code(128) == 2


def test_unpack_restores_codes():
    rng = np.random.default_rng(0)
    for k in (1, 12, 64, 100):
        Z = _random_codes(rng, 5, k)
        assert np.array_equal(unpack_codes(pack_codes(Z)), Z)


def test_pack_rejects_non_sign_values():
    with pytest.raises(ValueError):
        pack_codes([[1, 0, -1]])
    with pytest.raises(ShapeError):
        pack_codes([1, -1])


def test_packed_matrix_validates_layout_and_labels():
    with pytest.raises(ShapeError):
        pack_codes(np.ones((2, 12)), labels=[0])
    with pytest.raises(ShapeError):
        pack_codes(np.ones((2, 12)), layout=(6, 2, 2))
    packed = pack_codes(np.ones((2, 12)), labels=[3, 4], layout=(6, 2, 2, 2))
    assert packed.lengths == (6, 2, 2, 2)
    assert pack_codes(np.ones((1, 12))).lengths == (12,)


def test_hamming_examples():
    a = pack_codes([[1, 1, -1, -1]]).row(0)
    b = pack_codes([[1, -1, 1, -1]]).row(0)
    assert hamming(a, a) == 0
    assert hamming(a, b) == 2
    ones = pack_codes(np.ones((1, 48))).row(0)
    assert hamming(ones, pack_codes(-np.ones((1, 48))).row(0)) == 48


def test_hamming_is_a_metric_matching_sign_disagreements():
    rng = np.random.default_rng(1)
    Z = _random_codes(rng, 30, 96)
    packed = pack_codes(Z)
    for _ in range(200):
        i, j, l = rng.integers(0, 30, size=3)
        a, b, c = packed.row(i), packed.row(j), packed.row(l)
        assert hamming(a, b) == int((Z[i] != Z[j]).sum())
        assert hamming(a, b) == hamming(b, a)
        assert hamming(a, c) <= hamming(a, b) + hamming(b, c)


def test_hamming_rejects_length_mismatch():
    with pytest.raises(ShapeError):
        hamming(PackedCode(64, np.zeros(1, dtype=np.uint64)), PackedCode(64, np.zeros(2, dtype=np.uint64)))
    # same word count, different bit lengths
    with pytest.raises(ShapeError):
        hamming(pack_codes(np.ones((1, 12))).row(0), pack_codes(np.ones((1, 13))).row(0))
    db = pack_codes(np.ones((3, 12)))
    with pytest.raises(ShapeError):
        search_topk(pack_codes(np.ones((1, 13))).row(0), db, 1)


def test_search_topk_matches_brute_force_oracle():
    rng = np.random.default_rng(2)
    db_codes = _random_codes(rng, 200, 48)
    db = pack_codes(db_codes, labels=np.arange(200) % 5)
    for _ in range(20):
        q = _random_codes(rng, 1, 48)
        expected = sorted(range(200), key=lambda j: (int((q[0] != db_codes[j]).sum()), j))
        ranking = search_topk(pack_codes(q).row(0), db, 25)
        assert ranking.indices.tolist() == expected[:25]
        assert np.all(np.diff(ranking.distances) >= 0)


def test_search_ties_keep_database_order():
    db = pack_codes(np.ones((4, 8)))
    ranking = search_topk(pack_codes(np.ones((1, 8))).row(0), db, 4)
    assert ranking.indices.tolist() == [0, 1, 2, 3]
    assert ranking.distances.tolist() == [0, 0, 0, 0]


def test_search_topk_rejects_bad_requests():
    db = pack_codes(np.ones((3, 8)))
    q = db.row(0)
    with pytest.raises(ValueError):
        search_topk(q, db, 0)
    with pytest.raises(ValueError):
        search_topk(q, db, 4)
    empty = PackedCodeMatrix(8, np.zeros((0, 1), dtype=np.uint64), np.zeros(0, dtype=np.int64))
    with pytest.raises(ValueError):
        search_topk(q, empty, 1)
    with pytest.raises(ShapeError):
        hamming_distances(np.zeros(2, dtype=np.uint64), db)


def test_search_many_keeps_query_order(monkeypatch):
    monkeypatch.setenv("SEMICON_THREADS", "3")
    rng = np.random.default_rng(3)
    db = pack_codes(_random_codes(rng, 40, 16))
    queries = pack_codes(_random_codes(rng, 9, 16))
    seen = []
    rankings = search_many(queries, db, progress_cb=seen.append)
    assert len(rankings) == 9
    for i, ranking in enumerate(rankings):
        assert len(ranking.indices) == 40
        assert np.array_equal(ranking.indices, search_topk(queries.row(i), db, 40).indices)
    assert seen and seen[-1] == 100
    with pytest.raises(ShapeError):
        search_many(pack_codes(np.ones((1, 8))), db)
