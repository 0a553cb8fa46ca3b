# semicon/data/synthetic.py
# Deterministic fine-grained toy data.
# - every class shares one smooth background and adds a faint class tint
# - each class owns `parts_per_class` Gaussian blobs at grid cells no other class uses
# - i.i.d. noise on top; noise_sigma = 0 gives identical samples per class
# - database/query split is stratified per class

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from semicon.errors import ConfigError, FileFormatError
from semicon.models.enums import Split
from semicon.models.settings import SyntheticDatasetSpec

log = logging.getLogger("semicon.data")

CELL = 4            # part grid pitch in pixels
PART_SIGMA = 1.5    # blob width in pixels
BACKGROUND_AMPLITUDE = 0.5
TINT_AMPLITUDE = 0.2

_KEYS = ("images", "labels", "database", "query")


@dataclass(frozen=True)
class SyntheticDataset:
    images: np.ndarray      # N×C×H×W float32
    labels: np.ndarray      # N
    database: np.ndarray    # sample indices of the database split
    query: np.ndarray       # sample indices of the query split

    def __post_init__(self) -> None:
        n = len(self.labels)
        if self.images.ndim != 4 or self.images.shape[0] != n:
            raise ConfigError(f"dataset images {self.images.shape} do not match {n} labels")
        both = np.concatenate([self.database, self.query])
        if len(np.unique(both)) != len(both) or (len(both) and (both.min() < 0 or both.max() >= n)):
            raise ConfigError("database and query splits must be disjoint sample indices")

    def split(self, which: Split) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(images, labels, sample ids) of one split."""
        ids = self.database if which is Split.DATABASE else self.query
        return self.images[ids], self.labels[ids], ids

    def database_split(self):
        return self.split(Split.DATABASE)


def _smooth_field(rng: np.random.Generator, channels: int, h: int, w: int, amplitude: float) -> np.ndarray:
    coarse = rng.standard_normal((channels, h // CELL, w // CELL)) * amplitude
    return np.repeat(np.repeat(coarse, CELL, axis=1), CELL, axis=2)


def _blob(h: int, w: int, cy: float, cx: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    return np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * PART_SIGMA**2))


def class_prototypes(spec: SyntheticDatasetSpec) -> np.ndarray:
    """classes×C×H×W noise-free class images."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    c, h, w = spec.channels, spec.height, spec.width
    cells = (h // CELL) * (w // CELL)
    needed = spec.classes * spec.parts_per_class
    if needed > cells:
        raise ConfigError(f"{needed} parts do not fit the {cells} grid cells of a {h}×{w} image")

    background = _smooth_field(rng, c, h, w, BACKGROUND_AMPLITUDE)
    positions = rng.permutation(cells)[:needed].reshape(spec.classes, spec.parts_per_class)
    protos = np.empty((spec.classes, c, h, w))
    for cls in range(spec.classes):
        img = background + _smooth_field(rng, c, h, w, TINT_AMPLITUDE)
        for cell in positions[cls]:
            cy = (cell // (w // CELL)) * CELL + (CELL - 1) / 2.0
            cx = (cell % (w // CELL)) * CELL + (CELL - 1) / 2.0
            pattern = np.where(rng.random(c) < 0.5, -1.0, 1.0)
            img = img + spec.part_amplitude * pattern[:, None, None] * _blob(h, w, cy, cx)
        protos[cls] = img
    return protos


def generate_synthetic(spec: SyntheticDatasetSpec) -> SyntheticDataset:
    protos = class_prototypes(spec)
    rng = np.random.default_rng([spec.seed, 1])
    n_cls, per = spec.classes, spec.samples_per_class
    labels = np.repeat(np.arange(n_cls, dtype=np.int64), per)
    images = protos[labels] + spec.noise_sigma * rng.standard_normal((len(labels), *protos.shape[1:]))

    n_db = min(max(int(round(per * spec.database_fraction)), 1), per - 1)
    database, query = [], []
    for cls in range(n_cls):
        members = cls * per + rng.permutation(per)
        database.extend(sorted(members[:n_db]))
        query.extend(sorted(members[n_db:]))
    log.info("Generated %d samples (%d classes): %d database, %d query",
             len(labels), n_cls, len(database), len(query))
    return SyntheticDataset(
        images.astype(np.float32),
        labels,
        np.asarray(database, dtype=np.int64),
        np.asarray(query, dtype=np.int64),
    )


def save_dataset(dataset: SyntheticDataset, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("wb") as fh:
        np.savez(fh, images=dataset.images, labels=dataset.labels, database=dataset.database, query=dataset.query)
    return p


def load_dataset(path: str | Path) -> SyntheticDataset:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Dataset not found: {p}")
    try:
        with np.load(p, allow_pickle=False) as data:
            arrays = {k: data[k] for k in _KEYS if k in data.files}
    except (OSError, ValueError) as exc:
        raise FileFormatError(f"Dataset {p.name} is not a readable .npz archive: {exc}", offset=0, field="archive") from exc
    missing = [k for k in _KEYS if k not in arrays]
    if missing:
        raise FileFormatError(f"Dataset {p.name} lacks arrays {missing}", field=missing[0])
    try:
        return SyntheticDataset(
            arrays["images"].astype(np.float32),
            arrays["labels"].astype(np.int64),
            arrays["database"].astype(np.int64),
            arrays["query"].astype(np.int64),
        )
    except ConfigError as exc:
        raise FileFormatError(f"Dataset {p.name} is inconsistent: {exc}", field="labels") from exc
