from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from semicon.core.tensor import constant
from semicon.hashing.codes import binarize
from semicon.utils.logging_utils import ProgressCb, emit_progress
from .pool import parallel_map

log = logging.getLogger("semicon.encode")

# fixed so that the result never depends on the thread count
ENCODE_CHUNK = 32


@dataclass
class EncodeResult:
    relaxed: np.ndarray                 # N×k network outputs before the sign
    codes: np.ndarray                   # N×k over ±1
    first_maps: List[np.ndarray] = field(default_factory=list)   # per-stage maps of sample 0


class EncodeWorker:
    """Inference-mode forward pass over a stack of images, chunk by chunk."""

    def __init__(
        self,
        model,
        images: np.ndarray,
        chunk: int = ENCODE_CHUNK,
        progress_cb: ProgressCb = None,
        log_cb: Optional[Callable[[str], None]] = None,
    ):
        self._model = model
        self._images = images
        self._chunk = chunk
        self._progress_cb = progress_cb
        self._log_cb = log_cb
        self._cancel = False

    def cancel(self) -> None:
        self._cancel = True

    @property
    def cancelled(self) -> bool:
        return self._cancel

    def _encode_chunk(self, start: int):
        if self._cancel:
            return None
        out = self._model(constant(self._images[start:start + self._chunk]))
        return out.v.data.astype(np.float64), [m.data[0] for m in out.maps] if start == 0 else []

    def _log(self, line: str) -> None:
        log.info(line)
        if self._log_cb is not None:
            try:
                self._log_cb(line)
            except Exception:
                log.warning("Log callback raised an exception", exc_info=True)

    def run(self) -> Optional[EncodeResult]:
        """None when cancelled before every chunk finished."""
        self._model.eval()
        n = len(self._images)
        starts = list(range(0, n, self._chunk))
        self._log(f"Encoding {n} samples in {len(starts)} chunks")
        parts = parallel_map(self._encode_chunk, starts, self._progress_cb)
        if self._cancel or any(p is None for p in parts):
            self._log("Encoding cancelled")
            return None
        k = self._model.layout.k
        relaxed = np.concatenate([p[0] for p in parts]) if parts else np.zeros((0, k))
        emit_progress(self._progress_cb, 100, log)
        return EncodeResult(relaxed, binarize(relaxed), parts[0][1] if parts else [])
