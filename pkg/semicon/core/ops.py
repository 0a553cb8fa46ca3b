# semicon/core/ops.py
# Primitive operations with their backward rules.
# - Spatial tensors are (..., C, H, W): the channel axis is -3
# - Rank-1/2 tensors use the last axis as channel axis (codes, pooled features)
# - Reductions accumulate in float64 and store in the default dtype
# - forward(kind, inputs, **attrs) dispatches on the closed PrimitiveKind set;
#   the structural helpers further down are layout/reduction plumbing

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from semicon.errors import ShapeError
from semicon.models.enums import PrimitiveKind
from .tensor import Tensor, check_finite, record_op

F64 = np.float64


def _channel_axis(ndim: int) -> int:
    return -3 if ndim >= 3 else -1


def _f64(t: Tensor) -> np.ndarray:
    return t.data.astype(F64, copy=False)


def _sum_to_shape(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Undo numpy broadcasting by summing the broadcast axes."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _require_spatial(kind: str, x: Tensor) -> None:
    if x.ndim not in (3, 4):
        raise ShapeError(f"{kind}: expected a C×H×W or B×C×H×W tensor, got shape {x.shape}")


# ---------------------------- closed primitive set ----------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    kind = PrimitiveKind.MATMUL.value
    check_finite(kind, a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"{kind}: cannot multiply shapes {a.shape} and {b.shape}")
    if b.ndim > 2 and b.shape[:-2] != a.shape[:-2]:
        raise ShapeError(f"{kind}: batch extents differ: {a.shape} vs {b.shape}")
    A, B = _f64(a), _f64(b)

    def backward(g: np.ndarray):
        ga = np.matmul(g, np.swapaxes(B, -1, -2))
        gb = np.matmul(np.swapaxes(A, -1, -2), g)
        return ga, _sum_to_shape(gb, b.shape)

    return record_op(kind, np.matmul(A, B), (a, b), backward)


def pointwise_linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """1×1 convolution: per-cell linear map over channels, weight is (C_out, C_in)."""
    kind = PrimitiveKind.POINTWISE_LINEAR.value
    _require_spatial(kind, x)
    check_finite(kind, x, weight)
    if weight.ndim != 2 or weight.shape[1] != x.shape[-3]:
        raise ShapeError(f"{kind}: weight {weight.shape} does not accept {x.shape[-3]} input channels")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeError(f"{kind}: bias {bias.shape} does not match {weight.shape[0]} output channels")
    X, W = _f64(x), _f64(weight)
    out = np.einsum("oc,...chw->...ohw", W, X)
    if bias is not None:
        out = out + _f64(bias)[:, None, None]
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def backward(g: np.ndarray):
        gx = np.einsum("oc,...ohw->...chw", W, g)
        gw = np.einsum("bohw,bchw->oc", g.reshape(-1, *g.shape[-3:]), X.reshape(-1, *X.shape[-3:]))
        if bias is None:
            return gx, gw
        gb = g.reshape(-1, *g.shape[-3:]).sum(axis=(0, 2, 3))
        return gx, gw, gb

    return record_op(kind, out, inputs, backward)


def grouped_pointwise_linear(x: Tensor, weight: Tensor, groups: int, bias: Optional[Tensor] = None) -> Tensor:
    """Grouped 1×1 convolution; weight is (C_out, C_in / groups)."""
    kind = PrimitiveKind.GROUPED_POINTWISE_LINEAR.value
    _require_spatial(kind, x)
    check_finite(kind, x, weight)
    cin = x.shape[-3]
    if groups < 1 or cin % groups or weight.ndim != 2 or weight.shape[0] % groups:
        raise ShapeError(f"{kind}: group count {groups} does not divide channels {cin} / weight {weight.shape}")
    if weight.shape[1] != cin // groups:
        raise ShapeError(f"{kind}: weight {weight.shape} expects {weight.shape[1]} channels per group, got {cin // groups}")
    cout = weight.shape[0]
    lead, (h, w) = x.shape[:-3], x.shape[-2:]
    X = _f64(x).reshape(*lead, groups, cin // groups, h, w)
    W = _f64(weight).reshape(groups, cout // groups, cin // groups)
    out = np.einsum("goc,...gchw->...gohw", W, X).reshape(*lead, cout, h, w)
    if bias is not None:
        out = out + _f64(bias)[:, None, None]
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def backward(g: np.ndarray):
        G = g.reshape(*lead, groups, cout // groups, h, w)
        gx = np.einsum("goc,...gohw->...gchw", W, G).reshape(x.shape)
        gw = np.einsum(
            "bgohw,bgchw->goc", G.reshape(-1, *G.shape[-4:]), X.reshape(-1, *X.shape[-4:])
        ).reshape(weight.shape)
        if bias is None:
            return gx, gw
        return gx, gw, g.reshape(-1, cout, h, w).sum(axis=(0, 2, 3))

    return record_op(kind, out, inputs, backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    kind = PrimitiveKind.SOFTMAX.value
    check_finite(kind, x)
    X = _f64(x)
    e = np.exp(X - X.max(axis=axis, keepdims=True))
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return record_op(kind, s, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    kind = PrimitiveKind.TANH.value
    check_finite(kind, x)
    y = np.tanh(_f64(x))

    def backward(g: np.ndarray):
        return (g * (1.0 - y * y),)

    return record_op(kind, y, (x,), backward)


def relu(x: Tensor) -> Tensor:
    kind = PrimitiveKind.RELU.value
    check_finite(kind, x)
    mask = x.data > 0

    def backward(g: np.ndarray):
        return (g * mask,)

    return record_op(kind, np.where(mask, x.data, 0), (x,), backward)


def hadamard(x: Tensor, mask: Tensor) -> Tensor:
    """x (..., C, H, W) times an H×W map broadcast over channels (mask (..., H, W) or (H, W))."""
    kind = PrimitiveKind.HADAMARD.value
    _require_spatial(kind, x)
    check_finite(kind, x, mask)
    per_sample = x.shape[:-3] + x.shape[-2:]
    if mask.shape != per_sample and mask.shape != x.shape[-2:]:
        raise ShapeError(f"{kind}: map of shape {mask.shape} does not match tensor {x.shape}")
    X, M = _f64(x), _f64(mask)[..., None, :, :]

    def backward(g: np.ndarray):
        gm = (g * X).sum(axis=-3)
        return g * M, _sum_to_shape(gm, mask.shape)

    return record_op(kind, X * M, (x, mask), backward)


def signed_sqrt(x: Tensor, delta: float) -> Tensor:
    """sign(x)·sqrt(|x| + delta) with sign(0) = 0."""
    kind = PrimitiveKind.SIGNED_SQRT.value
    check_finite(kind, x)
    X = _f64(x)
    root = np.sqrt(np.abs(X) + delta)

    def backward(g: np.ndarray):
        # d/dx sign(x)·sqrt(|x|+δ) = 1 / (2·sqrt(|x|+δ)); at 0 this is the one-sided limit
        return (g / (2.0 * root),)

    return record_op(kind, np.sign(X) * root, (x,), backward)


@dataclass
class BatchNormState:
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5


def _bn_axes(x: Tensor) -> Tuple[int, ...]:
    ch = x.ndim + _channel_axis(x.ndim)
    return tuple(a for a in range(x.ndim) if a != ch)


def _bn_view(v: np.ndarray, ndim: int) -> np.ndarray:
    return v.reshape((-1, 1, 1)) if ndim >= 3 else v


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState, training: bool) -> Tensor:
    """Per-channel normalisation; training mode updates the running statistics in `state`."""
    kind = PrimitiveKind.BATCH_NORM.value
    check_finite(kind, x, gamma, beta)
    c = x.shape[_channel_axis(x.ndim)]
    if gamma.shape != (c,) or beta.shape != (c,) or state.running_mean.shape != (c,):
        raise ShapeError(f"{kind}: scale/shift {gamma.shape}/{beta.shape} do not match {c} channels of {x.shape}")
    axes = _bn_axes(x)
    X, gam = _f64(x), _bn_view(_f64(gamma), x.ndim)

    if training:
        n = X.size // c
        mean = X.mean(axis=axes)
        var = X.var(axis=axes)
        unbiased = var * n / (n - 1) if n > 1 else var
        m = state.momentum
        state.running_mean[...] = (1 - m) * state.running_mean + m * mean
        state.running_var[...] = (1 - m) * state.running_var + m * unbiased
    else:
        mean = state.running_mean.astype(F64)
        var = state.running_var.astype(F64)

    inv_std = _bn_view(1.0 / np.sqrt(var + state.eps), x.ndim)
    xhat = (X - _bn_view(mean, x.ndim)) * inv_std
    out = gam * xhat + _bn_view(_f64(beta), x.ndim)

    def backward(g: np.ndarray):
        ggamma = (g * xhat).sum(axis=axes)
        gbeta = g.sum(axis=axes)
        if training:
            gm = g.mean(axis=axes, keepdims=True)
            gxm = (g * xhat).mean(axis=axes, keepdims=True)
            gx = gam * inv_std * (g - gm - xhat * gxm)
        else:
            gx = g * gam * inv_std
        return gx, ggamma, gbeta

    return record_op(kind, out, (x, gamma, beta), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    kind = PrimitiveKind.GLOBAL_AVG_POOL.value
    _require_spatial(kind, x)
    check_finite(kind, x)
    h, w = x.shape[-2:]

    def backward(g: np.ndarray):
        return (np.broadcast_to(g[..., None, None] / (h * w), x.shape).copy(),)

    return record_op(kind, _f64(x).mean(axis=(-2, -1)), (x,), backward)


def residual_add(a: Tensor, b: Tensor) -> Tensor:
    kind = PrimitiveKind.RESIDUAL_ADD.value
    check_finite(kind, a, b)
    if a.shape != b.shape:
        raise ShapeError(f"{kind}: shapes differ: {a.shape} vs {b.shape}")

    def backward(g: np.ndarray):
        return g, g

    return record_op(kind, a.data + b.data, (a, b), backward)


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    kind = PrimitiveKind.CONCAT.value
    if not parts:
        raise ShapeError(f"{kind}: nothing to concatenate")
    check_finite(kind, *parts)
    ndim = parts[0].ndim
    axis = _channel_axis(ndim)
    for p in parts:
        if p.ndim != ndim or _drop(p.shape, axis) != _drop(parts[0].shape, axis):
            raise ShapeError(f"{kind}: cannot concatenate {p.shape} with {parts[0].shape}")
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray):
        return tuple(np.split(g, bounds, axis=axis))

    return record_op(kind, np.concatenate([p.data for p in parts], axis=axis), tuple(parts), backward)


def _drop(shape: Tuple[int, ...], axis: int) -> Tuple[int, ...]:
    s = list(shape)
    del s[axis]
    return tuple(s)


def scale(x: Tensor, factor: float) -> Tensor:
    kind = PrimitiveKind.SCALE.value
    check_finite(kind, x)

    def backward(g: np.ndarray):
        return (g * factor,)

    return record_op(kind, _f64(x) * factor, (x,), backward)


_DISPATCH: Dict[PrimitiveKind, Callable[..., Tensor]] = {
    PrimitiveKind.MATMUL: matmul,
    PrimitiveKind.POINTWISE_LINEAR: pointwise_linear,
    PrimitiveKind.GROUPED_POINTWISE_LINEAR: grouped_pointwise_linear,
    PrimitiveKind.SOFTMAX: softmax,
    PrimitiveKind.TANH: tanh,
    PrimitiveKind.RELU: relu,
    PrimitiveKind.HADAMARD: hadamard,
    PrimitiveKind.SIGNED_SQRT: signed_sqrt,
    PrimitiveKind.BATCH_NORM: batch_norm,
    PrimitiveKind.GLOBAL_AVG_POOL: global_avg_pool,
    PrimitiveKind.RESIDUAL_ADD: residual_add,
    PrimitiveKind.SCALE: scale,
}


def forward(kind: PrimitiveKind, inputs: Sequence[Tensor], **attrs) -> Tensor:
    """Apply one primitive of the closed set by kind."""
    if kind is PrimitiveKind.CONCAT:
        return concat_channels(inputs)
    fn = _DISPATCH.get(kind)
    if fn is None:
        raise ValueError(f"Unknown primitive kind: {kind!r}")
    return fn(*inputs, **attrs)


# ---------------------------- structural helpers ----------------------------


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    out = x.data.reshape(tuple(shape))

    def backward(g: np.ndarray):
        return (g.reshape(x.shape),)

    return record_op("reshape", out, (x,), backward)


def swap_axes(x: Tensor, a: int, b: int) -> Tensor:
    def backward(g: np.ndarray):
        return (np.swapaxes(g, a, b),)

    return record_op("swap-axes", np.swapaxes(x.data, a, b), (x,), backward)


def gather_channels(x: Tensor, indices: Sequence[int]) -> Tensor:
    """Select channels (axis -3 for spatial tensors) by index, in the given order."""
    idx = np.asarray(indices, dtype=np.int64)
    axis = _channel_axis(x.ndim)
    c = x.shape[axis]
    if idx.size == 0 or idx.min() < 0 or idx.max() >= c:
        raise ShapeError(f"gather-channels: indices {idx.tolist()} out of range for {c} channels")

    def backward(g: np.ndarray):
        gx = np.zeros(x.shape, dtype=F64)
        np.add.at(np.moveaxis(gx, axis, 0), idx, np.moveaxis(g, axis, 0))
        return (gx,)

    return record_op("gather-channels", np.take(x.data, idx, axis=axis), (x,), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes differ: {a.shape} vs {b.shape}")

    def backward(g: np.ndarray):
        return g, g

    return record_op("add", _f64(a) + _f64(b), (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"sub: shapes differ: {a.shape} vs {b.shape}")

    def backward(g: np.ndarray):
        return g, -g

    return record_op("sub", _f64(a) - _f64(b), (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes differ: {a.shape} vs {b.shape}")
    A, B = _f64(a), _f64(b)

    def backward(g: np.ndarray):
        return g * B, g * A

    return record_op("mul", A * B, (a, b), backward)


def square(x: Tensor) -> Tensor:
    X = _f64(x)

    def backward(g: np.ndarray):
        return (2.0 * X * g,)

    return record_op("square", X * X, (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    def backward(g: np.ndarray):
        return (np.broadcast_to(g, x.shape).astype(F64),)

    return record_op("sum", np.asarray(_f64(x).sum()), (x,), backward)


# ---------------------------- extractor-only ----------------------------


def conv3x3(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """3×3 convolution, stride 1, zero padding 1; weight is (C_out, C_in, 3, 3)."""
    if x.ndim != 4 or weight.shape[1:] != (x.shape[1], 3, 3) or bias.shape != (weight.shape[0],):
        raise ShapeError(f"conv3x3: input {x.shape} / weight {weight.shape} / bias {bias.shape} do not conform")
    check_finite("conv3x3", x, weight, bias)
    h, w = x.shape[-2:]
    Xp = np.pad(_f64(x), ((0, 0), (0, 0), (1, 1), (1, 1)))
    W = _f64(weight)
    out = np.zeros((x.shape[0], weight.shape[0], h, w), dtype=F64)
    for di in range(3):
        for dj in range(3):
            out += np.einsum("oc,bchw->bohw", W[:, :, di, dj], Xp[:, :, di:di + h, dj:dj + w])
    out += _f64(bias)[:, None, None]

    def backward(g: np.ndarray):
        gxp = np.zeros_like(Xp)
        gw = np.zeros_like(W)
        for di in range(3):
            for dj in range(3):
                gxp[:, :, di:di + h, dj:dj + w] += np.einsum("oc,bohw->bchw", W[:, :, di, dj], g)
                gw[:, :, di, dj] = np.einsum("bohw,bchw->oc", g, Xp[:, :, di:di + h, dj:dj + w])
        return gxp[:, :, 1:-1, 1:-1], gw, g.sum(axis=(0, 2, 3))

    return record_op("conv3x3", out, (x, weight, bias), backward)


def avg_pool2(x: Tensor) -> Tensor:
    """2×2 average pooling with stride 2."""
    if x.ndim != 4 or x.shape[-1] % 2 or x.shape[-2] % 2:
        raise ShapeError(f"avg-pool2: expected B×C×H×W with even H, W, got {x.shape}")
    b, c, h, w = x.shape
    out = _f64(x).reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def backward(g: np.ndarray):
        return (np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) / 4.0,)

    return record_op("avg-pool2", out, (x,), backward)


__all__: List[str] = [
    "matmul", "pointwise_linear", "grouped_pointwise_linear", "softmax", "tanh", "relu",
    "hadamard", "signed_sqrt", "BatchNormState", "batch_norm", "global_avg_pool",
    "residual_add", "concat_channels", "scale", "forward",
    "reshape", "swap_axes", "gather_channels", "add", "sub", "mul", "square", "sum_all",
    "conv3x3", "avg_pool2",
]
