# semicon/retrieval/index_file.py
# "SMCN" packed code index.
#   magic "SMCN" | version u16 = 1 | k u16 | m u8 | m+1 code lengths u16 | count u64
#   then per code: label u32 | ceil(k/64) words u64          (all little-endian)
# m = 0 marks a global-only code.

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from semicon.errors import FileFormatError
from .packing import PackedCodeMatrix, words_per_code

MAGIC = b"SMCN"
VERSION = 1


def _record_dtype(n_words: int) -> np.dtype:
    return np.dtype([("label", "<u4"), ("words", "<u8", (n_words,))])


def encode_index(packed: PackedCodeMatrix) -> bytes:
    lengths = packed.lengths
    if packed.k > 0xFFFF or len(lengths) - 1 > 0xFF:
        raise ValueError(f"index cannot hold k={packed.k} with {len(lengths)} code parts")
    if packed.count and (packed.labels.min() < 0 or packed.labels.max() > 0xFFFFFFFF):
        raise ValueError("index labels must fit in an unsigned 32-bit field")
    m = len(lengths) - 1
    header = MAGIC + struct.pack(f"<HHB{m + 1}HQ", VERSION, packed.k, m, *lengths, packed.count)
    records = np.zeros(packed.count, dtype=_record_dtype(words_per_code(packed.k)))
    records["label"] = packed.labels
    records["words"] = packed.words
    return header + records.tobytes()


def decode_index(blob: bytes) -> PackedCodeMatrix:
    if len(blob) < 6:
        raise FileFormatError("Index truncated before header", offset=0, field="magic")
    if blob[:4] != MAGIC:
        raise FileFormatError(f"Bad index magic {blob[:4]!r}", offset=0, field="magic")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != VERSION:
        raise FileFormatError(f"Unsupported index version {version}", offset=4, field="version")
    if len(blob) < 9:
        raise FileFormatError("Index truncated in header", offset=6, field="k")
    k, m = struct.unpack_from("<HB", blob, 6)
    if k == 0:
        raise FileFormatError("Code length k is zero", offset=6, field="k")
    pos = 9
    if len(blob) < pos + 2 * (m + 1) + 8:
        raise FileFormatError("Index truncated in layout", offset=pos, field="layout")
    lengths = struct.unpack_from(f"<{m + 1}H", blob, pos)
    if sum(lengths) != k or min(lengths) == 0:
        raise FileFormatError(f"Layout {lengths} does not split k={k}", offset=pos, field="layout")
    pos += 2 * (m + 1)
    (count,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    dtype = _record_dtype(words_per_code(k))
    if count > (len(blob) - pos) // dtype.itemsize:
        raise FileFormatError(f"Code count {count} exceeds file size", offset=pos - 8, field="count")
    if len(blob) - pos != count * dtype.itemsize:
        raise FileFormatError("Trailing bytes after the last code", offset=pos + count * dtype.itemsize, field="records")
    records = np.frombuffer(blob, dtype=dtype, count=count, offset=pos)
    words = records["words"].astype(np.uint64).reshape(count, words_per_code(k))
    pad = words_per_code(k) * 64 - k
    if pad and count and np.any(words[:, -1] >> np.uint64(64 - pad)):
        raise FileFormatError("Nonzero pad bits in packed codes", offset=pos, field="words")
    layout = tuple(lengths) if m else ()
    return PackedCodeMatrix(k, words, records["label"].astype(np.int64), layout)


def write_index(path: str | Path, packed: PackedCodeMatrix) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(encode_index(packed))
    return p


def read_index(path: str | Path) -> PackedCodeMatrix:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Index not found: {p}")
    return decode_index(p.read_bytes())
