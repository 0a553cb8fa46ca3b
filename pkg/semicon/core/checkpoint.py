# semicon/core/checkpoint.py
# "SMCK" tensor dump.
#   magic "SMCK" | version u16 LE = 1 | records until EOF
#   record: name-length u32 LE | name UTF-8 | rank u8 | extents u32 LE each | payload float32 LE

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, Mapping

import numpy as np

from semicon.errors import FileFormatError

MAGIC = b"SMCK"
VERSION = 1
MAX_RANK = 8


def encode_checkpoint(tensors: Mapping[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<H", VERSION)]
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        arr = np.asarray(arr, dtype="<f4")
        if arr.ndim > MAX_RANK:
            raise ValueError(f"Tensor {name!r} has rank {arr.ndim} > {MAX_RANK}")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(chunks)


def decode_checkpoint(blob: bytes) -> Dict[str, np.ndarray]:
    if len(blob) < 6:
        raise FileFormatError("Checkpoint truncated before header", offset=0, field="magic")
    if blob[:4] != MAGIC:
        raise FileFormatError(f"Bad checkpoint magic {blob[:4]!r}", offset=0, field="magic")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != VERSION:
        raise FileFormatError(f"Unsupported checkpoint version {version}", offset=4, field="version")

    out: Dict[str, np.ndarray] = {}
    pos = 6
    end = len(blob)
    while pos < end:
        if end - pos < 4:
            raise FileFormatError("Truncated record header", offset=pos, field="name-length")
        (name_len,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        if name_len == 0 or name_len > end - pos:
            raise FileFormatError(f"Name length {name_len} exceeds file", offset=pos - 4, field="name-length")
        try:
            name = blob[pos:pos + name_len].decode("utf-8")
        except UnicodeDecodeError:
            raise FileFormatError("Record name is not UTF-8", offset=pos, field="name") from None
        pos += name_len
        if pos >= end:
            raise FileFormatError("Truncated record", offset=pos, field="rank")
        rank = blob[pos]
        if rank > MAX_RANK:
            raise FileFormatError(f"Rank {rank} exceeds {MAX_RANK}", offset=pos, field="rank")
        pos += 1
        if end - pos < 4 * rank:
            raise FileFormatError("Truncated extents", offset=pos, field="extents")
        shape = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        nbytes = 4 * int(np.prod(shape, dtype=np.int64))
        if nbytes > end - pos:
            raise FileFormatError(f"Payload of {name!r} exceeds file", offset=pos, field="payload")
        if name in out:
            raise FileFormatError(f"Duplicate tensor name {name!r}", offset=pos, field="name")
        out[name] = np.frombuffer(blob, dtype="<f4", count=nbytes // 4, offset=pos).reshape(shape).astype(np.float32)
        pos += nbytes
    return out


def save_checkpoint(path: str | Path, tensors: Mapping[str, np.ndarray]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(encode_checkpoint(tensors))
    return p


def load_checkpoint(path: str | Path) -> Dict[str, np.ndarray]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Checkpoint not found: {p}")
    return decode_checkpoint(p.read_bytes())
