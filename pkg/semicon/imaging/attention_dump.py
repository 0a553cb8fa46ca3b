# semicon/imaging/attention_dump.py
# Attention maps written as 8-bit graymaps (one file per stage) for eyeballing
# which regions each stage picked. Values are min-max scaled to 0..255; a flat
# map comes out black.

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Sequence

import numpy as np
from PIL import Image

from semicon.errors import ShapeError

log = logging.getLogger("semicon.imaging")


def map_to_gray(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"attention map must be H×W, got {m.shape}")
    lo, hi = float(m.min()), float(m.max())
    if hi - lo <= 0.0:
        return np.zeros(m.shape, dtype=np.uint8)
    return np.round((m - lo) / (hi - lo) * 255.0).astype(np.uint8)


def export_attention_maps(maps: Sequence, directory: str | Path, stem: str = "sample") -> List[Path]:
    """maps: per-stage H×W arrays (or tensors); returns the written paths, stage order."""
    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, m in enumerate(maps, 1):
        arr = m.numpy() if hasattr(m, "numpy") else m
        path = out_dir / f"{stem}_stage{i}.pgm"
        Image.fromarray(map_to_gray(arr)).save(path, format="PPM")
        paths.append(path)
    log.info("Wrote %d attention maps to %s", len(paths), out_dir)
    return paths
