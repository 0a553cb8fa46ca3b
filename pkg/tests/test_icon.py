import numpy as np
import pytest

from semicon.core import ops
from semicon.core.tensor import Tape, constant, default_dtype
from semicon.errors import ConfigError, ShapeError
from semicon.models.settings import IconConfig
from semicon.network.icon import (
    IconStats,
    IconStep,
    IconTransform,
    Portion,
    channel_attention,
    icon_forward,
    recombine,
    restore_order,
    scaled_channel_attention,
    split_channels,
)


def _softmax_rows(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def test_split_channels_contiguous():
    G = constant(np.arange(16.0).reshape(4, 2, 2))
    parts = split_channels(G, 2)
    assert [p.origin for p in parts] == [(0, 1), (2, 3)]
    assert np.array_equal(parts[1].channels.data, G.data[2:4])


def test_split_channels_degenerate_cases():
    G = constant(np.arange(16.0).reshape(4, 2, 2))
    single = split_channels(G, 1)
    assert len(single) == 1 and np.array_equal(single[0].channels.data, G.data)
    singletons = split_channels(G, 4)
    assert [p.origin for p in singletons] == [(0,), (1,), (2,), (3,)]


def test_split_channels_rejects_non_divisor():
    with pytest.raises(ConfigError):
        split_channels(constant(np.ones((6, 2, 2))), 4)
    with pytest.raises(ConfigError):
        IconConfig(portions=4).validate(6)


def test_single_token_attention_returns_v():
    x = constant(np.random.default_rng(0).standard_normal((1, 3, 3)))
    w = [constant(np.array([[0.7]])), constant(np.array([[-1.3]])), constant(np.array([[2.0]]))]
    out = channel_attention(Portion(x, (0,)), *w, IconConfig())
    assert np.allclose(out.channels.data, 2.0 * x.data, atol=1e-6)


def test_zero_query_gives_uniform_mixture():
    rng = np.random.default_rng(1)
    x = constant(rng.standard_normal((3, 2, 2)))
    eye = constant(np.eye(3))
    out = channel_attention(Portion(x, (0, 1, 2)), constant(np.zeros((3, 3))), eye, eye, IconConfig())
    mean_token = x.data.mean(axis=0)
    for c in range(3):
        assert np.allclose(out.channels.data[c], mean_token, atol=1e-6)


def test_two_channel_attention_by_hand():
    q = np.array([[1.0, 0.0, 2.0, 1.0], [0.5, -1.0, 0.0, 3.0]])
    k = np.array([[0.0, 1.0, 1.0, -1.0], [2.0, 0.0, -1.0, 1.0]])
    v = np.array([[1.0, 2.0, 3.0, 4.0], [-1.0, 0.0, 1.0, 0.0]])
    delta = 1e-5
    g = q @ k.T / np.sqrt(2.0)
    A = _softmax_rows(np.sign(g) * np.sqrt(np.abs(g) + delta))
    expected = (A @ v).reshape(2, 2, 2)
    with default_dtype(np.float64):
        out = scaled_channel_attention(
            constant(q.reshape(2, 2, 2)), constant(k.reshape(2, 2, 2)), constant(v.reshape(2, 2, 2)), delta
        )
    assert np.allclose(out.data, expected, atol=1e-12)


def test_attention_rows_sum_to_one():
    rng = np.random.default_rng(2)
    for _ in range(20):
        q, k = rng.standard_normal((2, 5, 9)) * 3
        g = q @ k.T / np.sqrt(5)
        A = ops.softmax(ops.signed_sqrt(constant(g), 1e-5), axis=-1).data
        assert np.all(A >= 0)
        assert np.allclose(A.sum(axis=-1), 1.0, atol=1e-6)


def test_split_recombine_restore_is_identity():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.choice([1, 2, 4]))
        d = int(rng.choice([1, 2, 3]))
        G = constant(rng.standard_normal((n * d, 2, 3)))
        restored = restore_order(recombine(split_channels(G, n)))
        assert np.array_equal(restored.data, G.data)


def test_recombine_layout():
    G = constant(np.arange(6.0)[:, None, None] * np.ones((6, 1, 1)))
    parts = recombine(split_channels(G, 3))          # N=3 portions of d=2
    assert [p.origin for p in parts] == [(0, 2, 4), (1, 3, 5)]
    assert np.array_equal(parts[1].channels.data[:, 0, 0], [1.0, 3.0, 5.0])


def test_recombine_twice_on_square_grid_restores_grouping():
    G = constant(np.random.default_rng(3).standard_normal((9, 2, 2)))
    parts = split_channels(G, 3)
    twice = recombine(recombine(parts))
    assert [p.origin for p in twice] == [p.origin for p in parts]
    for a, b in zip(twice, parts):
        assert np.array_equal(a.channels.data, b.channels.data)


def test_restore_order_rejects_incomplete_origins():
    x = constant(np.ones((2, 1, 1)))
    with pytest.raises(ShapeError):
        restore_order([Portion(x, (0, 2))])
    with pytest.raises(ShapeError):
        Portion(x, (1, 1))


@pytest.mark.parametrize("channels,portions", [(4, 1), (4, 2), (4, 4), (8, 2), (8, 4), (16, 2), (16, 4), (16, 8)])
def test_icon_forward_preserves_shape_and_is_deterministic(channels, portions):
    cfg = IconConfig(portions=portions)
    icon = IconTransform("icon.t", channels, cfg, np.random.default_rng(0))
    G = constant(np.random.default_rng(1).standard_normal((2, channels, 3, 3)))
    icon.eval()
    a = icon_forward(G, icon)
    b = icon_forward(G, icon)
    assert a.shape == G.shape
    assert np.array_equal(a.data, b.data)


def test_shared_projection_mode():
    cfg = IconConfig(portions=2, grouped=False)
    icon = IconTransform("icon.s", 8, cfg, np.random.default_rng(0))
    assert icon.step1.q.weight.shape == (4, 4)
    assert icon.step2.q.weight.shape == (2, 2)
    out = icon(constant(np.random.default_rng(1).standard_normal((2, 8, 2, 2))))
    assert out.shape == (2, 8, 2, 2)


def test_grouped_projection_shapes():
    icon = IconTransform("icon.g", 16, IconConfig(portions=4), np.random.default_rng(0))
    assert icon.step1.q.weight.shape == (16, 4)    # N=4 groups of d×d
    assert icon.step2.q.weight.shape == (16, 4)    # d=4 groups of N×N
    assert icon.step1.q.groups == 4 and icon.step2.q.groups == 4


def test_identity_projections_and_zero_init():
    rng = np.random.default_rng(2)
    G = constant(rng.standard_normal((2, 4, 2, 2)))
    icon = IconTransform("icon.z", 4, IconConfig(portions=2), rng, init="zeros")
    out = icon(G)
    assert np.all(np.isfinite(out.data))
    with pytest.raises(ConfigError):
        IconStep("bad", 2, 2, IconConfig(), rng, init="orthogonal")


def test_score_pairs_scale_with_portion_width():
    icon = IconTransform("icon.c", 16, IconConfig(portions=4), np.random.default_rng(0))
    stats = IconStats()
    icon(constant(np.random.default_rng(1).standard_normal((1, 16, 2, 2))), stats)
    c, n, d = 16, 4, 4
    for step in (0, 1):
        assert stats.score_pairs[step] <= c * c // n + c * d
        assert stats.score_pairs[step] < c * c
    assert stats.score_pairs == [n * d * d, d * n * n]


def test_forward_without_stats_sink_leaves_model_untouched():
    icon = IconTransform("icon.s", 8, IconConfig(portions=2), np.random.default_rng(0))
    G = constant(np.random.default_rng(2).standard_normal((2, 8, 2, 2)))
    icon(G)
    icon(G)
    assert not hasattr(icon, "stats")
    stats = IconStats()
    icon_forward(G, icon, stats)
    icon_forward(G, icon, stats)
    assert stats.score_pairs == [2 * 2 * 4 * 4, 2 * 4 * 2 * 2]


def test_icon_stats_defaults():
    assert IconStats().score_pairs == [0, 0]


def test_gradient_reaches_all_projections():
    rng = np.random.default_rng(4)
    icon = IconTransform("icon.r", 4, IconConfig(portions=2), rng)
    G = constant(rng.standard_normal((2, 4, 2, 2)))
    with Tape() as tape:
        loss = ops.sum_all(ops.square(icon(G)))
    grads = tape.backward(loss, icon.parameters())
    for step in ("step1", "step2"):
        for proj in ("q", "k", "v"):
            g = grads[f"icon.r.{step}.{proj}.weight"]
            assert np.any(g != 0), f"{step}.{proj}"
