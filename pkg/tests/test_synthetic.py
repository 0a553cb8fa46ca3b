from pathlib import Path

import numpy as np
import pytest

from semicon.errors import ConfigError, FileFormatError
from semicon.models.enums import Split
from semicon.models.settings import SyntheticDatasetSpec
from semicon.data.synthetic import (
    SyntheticDataset,
    class_prototypes,
    generate_synthetic,
    load_dataset,
    save_dataset,
)

SMALL = SyntheticDatasetSpec(classes=3, samples_per_class=6, height=16, width=16, seed=4)


def test_generation_is_deterministic():
    a = generate_synthetic(SMALL)
    b = generate_synthetic(SMALL)
    assert np.array_equal(a.images, b.images)
    assert np.array_equal(a.database, b.database)
    other = generate_synthetic(SyntheticDatasetSpec(classes=3, samples_per_class=6, height=16, width=16, seed=5))
    assert not np.array_equal(a.images, other.images)


def test_zero_noise_gives_identical_class_members():
    spec = SyntheticDatasetSpec(classes=3, samples_per_class=4, height=16, width=16, noise_sigma=0.0)
    ds = generate_synthetic(spec)
    for cls in range(3):
        members = ds.images[ds.labels == cls]
        assert np.all(members == members[0])
    assert not np.array_equal(ds.images[ds.labels == 0][0], ds.images[ds.labels == 1][0])


def test_shapes_and_stratified_split():
    ds = generate_synthetic(SMALL)
    assert ds.images.shape == (18, 3, 16, 16)
    assert ds.images.dtype == np.float32
    assert len(ds.database) + len(ds.query) == 18
    assert not set(ds.database.tolist()) & set(ds.query.tolist())
    # round(6 * 0.8) = 5 database samples per class
    for cls in range(3):
        assert int((ds.labels[ds.database] == cls).sum()) == 5
        assert int((ds.labels[ds.query] == cls).sum()) == 1
    images, labels, ids = ds.split(Split.QUERY)
    assert len(images) == len(labels) == len(ids) == 3


def test_classes_differ_at_their_parts():
    # a least-squares classifier on flattened prototypes separates every class from the mean
    protos = class_prototypes(SyntheticDatasetSpec(classes=4, samples_per_class=4, height=16, width=16))
    flat = protos.reshape(4, -1)
    centred = flat - flat.mean(axis=0)
    targets = np.eye(4) - 0.25
    weights, *_ = np.linalg.lstsq(centred, targets, rcond=None)
    assert np.array_equal(np.argmax(centred @ weights, axis=1), np.arange(4))


def test_least_squares_classifier_separates_two_classes_of_samples():
    spec = SyntheticDatasetSpec(classes=2, samples_per_class=20, height=16, width=16, seed=3)
    ds = generate_synthetic(spec)
    flat = ds.images.reshape(len(ds.labels), -1).astype(np.float64)
    targets = np.where(ds.labels == 1, 1.0, -1.0)
    centre = flat[ds.database].mean(axis=0)
    weights, *_ = np.linalg.lstsq(flat[ds.database] - centre, targets[ds.database], rcond=None)
    scores = (flat - centre) @ weights
    assert np.array_equal(np.sign(scores[ds.database]), targets[ds.database])
    assert np.array_equal(np.sign(scores[ds.query]), targets[ds.query])


def test_noisy_samples_stay_nearest_to_own_prototype():
    spec = SyntheticDatasetSpec(classes=4, samples_per_class=10, height=16, width=16, noise_sigma=0.3, seed=2)
    ds = generate_synthetic(spec)
    protos = class_prototypes(spec).reshape(4, -1)
    flat = ds.images.reshape(len(ds.labels), -1)
    d = ((flat[:, None] - protos[None]) ** 2).sum(axis=-1)
    assert np.mean(d.argmin(axis=1) == ds.labels) > 0.95


def test_invalid_specs():
    with pytest.raises(ConfigError):
        generate_synthetic(SyntheticDatasetSpec(classes=1))
    with pytest.raises(ConfigError):
        generate_synthetic(SyntheticDatasetSpec(height=10))
    with pytest.raises(ConfigError):
        class_prototypes(SyntheticDatasetSpec(classes=10, parts_per_class=2, height=8, width=8))


def test_overlapping_splits_rejected():
    with pytest.raises(ConfigError):
        SyntheticDataset(np.zeros((2, 1, 4, 4)), np.array([0, 1]), np.array([0, 1]), np.array([1]))


def test_save_and_load(tmp_path: Path):
    ds = generate_synthetic(SMALL)
    back = load_dataset(save_dataset(ds, tmp_path / "d" / "data.npz"))
    assert np.array_equal(back.images, ds.images)
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.query, ds.query)


def test_load_rejects_bad_files(tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "missing.npz")
    junk = tmp_path / "junk.npz"
    junk.write_bytes(b"not an archive")
    with pytest.raises(FileFormatError):
        load_dataset(junk)
    partial = tmp_path / "partial.npz"
    np.savez(partial, images=np.zeros((1, 1, 4, 4)), labels=np.zeros(1))
    with pytest.raises(FileFormatError) as info:
        load_dataset(partial)
    assert info.value.field == "database"
