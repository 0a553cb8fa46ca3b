from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from semicon.core import ops
from semicon.core.checkpoint import load_checkpoint, save_checkpoint
from semicon.core.tensor import Tape, constant
from semicon.errors import ConfigError, ShapeError
from semicon.models.enums import Variant
from semicon.models.settings import IconConfig, ModelConfig, RunConfig, SyntheticDatasetSpec
from semicon.network.extractor import FeatureExtractor
from semicon.network.icon import IconTransform
from semicon.network.semicon_net import SemiconNet


def tiny_config(variant: Variant = Variant.FULL, seed: int = 0) -> RunConfig:
    cfg = RunConfig(
        icon=IconConfig(portions=2),
        model=ModelConfig(hidden_channels=4, feature_channels=8, code_bits=12),
        data=SyntheticDatasetSpec(classes=3, samples_per_class=6, height=16, width=16),
        seed=seed,
    )
    return cfg.with_variant(variant)


def _images(n=2, seed=0):
    return constant(np.random.default_rng(seed).standard_normal((n, 3, 16, 16)))


def test_extractor_quarters_spatial_extent():
    ext = FeatureExtractor(3, 8, 16, np.random.default_rng(0))
    out = ext(constant(np.random.default_rng(1).standard_normal((1, 3, 32, 32))))
    assert out.shape == (1, 16, 8, 8)
    with pytest.raises(ShapeError):
        ext(constant(np.zeros((1, 3, 18, 18))))
    with pytest.raises(ShapeError):
        ext(constant(np.zeros((1, 2, 16, 16))))


def test_extractor_on_zero_input_ignores_conv_weights():
    zeros = constant(np.zeros((2, 3, 16, 16)))
    for training in (True, False):
        a = FeatureExtractor(3, 4, 8, np.random.default_rng(0)).train(training)
        b = FeatureExtractor(3, 4, 8, np.random.default_rng(9)).train(training)
        out = a(zeros).data
        assert out.shape == (2, 8, 4, 4)
        assert np.all(np.isfinite(out))
        assert np.array_equal(out, b(zeros).data)


def test_gradient_reaches_every_extractor_parameter():
    # inference-mode batch-norm, so the conv biases are not cancelled by the batch mean
    ext = FeatureExtractor(3, 4, 8, np.random.default_rng(0)).eval()
    with Tape() as tape:
        loss = ops.sum_all(ops.square(ext(_images(3, seed=4))))
    params = ext.parameters()
    assert len(params) == 8
    grads = tape.backward(loss, params)
    for p in params:
        assert np.any(grads[p.name] != 0), p.name


@pytest.mark.parametrize("variant", list(Variant), ids=lambda v: v.value)
def test_variant_output_shapes(variant):
    net = SemiconNet(tiny_config(variant))
    out = net(_images())
    assert out.v.shape == (2, 12)
    if variant is Variant.BASELINE:
        assert net.layout.lengths == (12,)
        assert out.maps == []
    else:
        assert net.layout.lengths == (6, 2, 2, 2)
        assert [m.shape for m in out.maps] == [(2, 4, 4)] * 3
    expected_icons = 4 if variant is Variant.FULL else 0
    assert len(net.icon_transforms) == expected_icons
    assert all(isinstance(t, IconTransform) for t in net.icon_transforms)


def test_relaxed_codes_are_bounded():
    net = SemiconNet(tiny_config())
    u = net.relaxed_codes(_images(3)).data
    assert u.shape == (3, 12)
    assert np.all(np.abs(u) <= 1.0)


def test_same_seed_same_network():
    a = SemiconNet(tiny_config(seed=5)).eval()
    b = SemiconNet(tiny_config(seed=5)).eval()
    assert np.array_equal(a(_images()).v.data, b(_images()).v.data)
    c = SemiconNet(tiny_config(seed=6)).eval()
    assert not np.array_equal(a(_images()).v.data, c(_images()).v.data)


def test_gradient_reaches_every_branch():
    net = SemiconNet(tiny_config())
    with Tape() as tape:
        loss = ops.sum_all(ops.square(net.relaxed_codes(_images())))
    grads = tape.backward(loss, net.parameters())
    for name in (
        "extractor.block1.conv.weight",
        "phi_global.pw1.weight",
        "phi_local.pw1.weight",
        "icon.global.step1.q.weight",
        "icon.local2.step2.v.weight",
        "sem.phi1.weight",
        "sem.phi3.weight",
        "head.global",
        "head.local3",
    ):
        assert np.any(grads[name] != 0), name


def test_parameter_names_are_unique():
    net = SemiconNet(tiny_config())
    names = [p.name for p in net.parameters()]
    assert len(names) == len(set(names))


def test_state_round_trip_through_checkpoint(tmp_path: Path):
    src = SemiconNet(tiny_config(seed=1))
    src(_images())  # moves batch-norm running statistics
    src.eval()
    path = save_checkpoint(tmp_path / "net.smck", src.state())
    dst = SemiconNet(tiny_config(seed=2))
    dst.load_state(load_checkpoint(path))
    dst.eval()
    assert np.array_equal(src(_images(seed=3)).v.data, dst(_images(seed=3)).v.data)


def test_portion_count_must_divide_channels():
    cfg = tiny_config()
    with pytest.raises(ConfigError):
        SemiconNet(replace(cfg, icon=IconConfig(portions=3)))
