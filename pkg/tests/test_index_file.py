import struct
from pathlib import Path

import numpy as np
import pytest

from semicon.errors import FileFormatError
from semicon.retrieval.index_file import decode_index, encode_index, read_index, write_index
from semicon.retrieval.packing import pack_codes


def _packed(k=12, count=5, layout=(6, 2, 2, 2), seed=0):
    rng = np.random.default_rng(seed)
    Z = np.where(rng.random((count, k)) < 0.5, -1, 1)
    return pack_codes(Z, labels=rng.integers(0, 9, size=count), layout=layout)


def test_index_file_round_trip(tmp_path: Path):
    packed = _packed()
    back = read_index(write_index(tmp_path / "db.smcn", packed))
    assert back.k == 12
    assert back.layout == (6, 2, 2, 2)
    assert np.array_equal(back.words, packed.words)
    assert back.labels.tolist() == packed.labels.tolist()


def test_header_layout():
    blob = encode_index(_packed())
    assert blob[:4] == b"SMCN"
    assert struct.unpack_from("<HHB", blob, 4) == (1, 12, 3)
    assert struct.unpack_from("<4H", blob, 9) == (6, 2, 2, 2)
    assert struct.unpack_from("<Q", blob, 17) == (5,)
    # 25-byte header, then 5 records of label u32 + one u64 word
    assert len(blob) == 25 + 5 * 12


def test_global_only_index_has_no_layout():
    packed = _packed(k=16, count=3, layout=())
    blob = encode_index(packed)
    assert struct.unpack_from("<HHBH", blob, 4) == (1, 16, 0, 16)
    assert decode_index(blob).layout == ()


def test_empty_index_round_trip():
    packed = pack_codes(np.ones((0, 8)))
    back = decode_index(encode_index(packed))
    assert back.count == 0 and back.k == 8


@pytest.mark.parametrize(
    "mutate,field",
    [
        (lambda b: b"SMCX" + b[4:], "magic"),
        (lambda b: b[:4] + struct.pack("<H", 2) + b[6:], "version"),
        (lambda b: b[:6] + struct.pack("<H", 0) + b[8:], "k"),
        (lambda b: b[:9] + struct.pack("<H", 7) + b[11:], "layout"),
        (lambda b: b[:17] + struct.pack("<Q", 6) + b[25:], "count"),
        (lambda b: b + b"\x00", "records"),
        (lambda b: b[:12], "layout"),
    ],
)
def test_corrupt_index_names_field(mutate, field):
    with pytest.raises(FileFormatError) as info:
        decode_index(mutate(encode_index(_packed())))
    assert info.value.field == field
    assert info.value.offset is not None


def test_nonzero_pad_bits_rejected():
    blob = bytearray(encode_index(_packed(count=1)))
    # first record: label at 25..29, word at 29..37; set bit 63
    blob[36] |= 0x80
    with pytest.raises(FileFormatError) as info:
        decode_index(bytes(blob))
    assert info.value.field == "words"


def test_missing_index_file(tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        read_index(tmp_path / "absent.smcn")


def test_labels_must_fit_the_field():
    packed = pack_codes(np.ones((1, 4)), labels=[-1])
    with pytest.raises(ValueError):
        encode_index(packed)
