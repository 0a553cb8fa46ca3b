# semicon/core/gradcheck.py
# Central finite-difference oracle for the autodiff engine.
# - Everything runs with float64 storage
# - The scalar checked is sum(out * R) for a fixed random R, so primitives whose
#   plain sum has a trivial gradient (softmax, batch-norm) are still exercised

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from semicon.models.enums import PrimitiveKind
from . import ops
from .tensor import Tape, Tensor, constant, default_dtype

STEP = 1e-3
DENOM_FLOOR = 1e-2


@dataclass(frozen=True)
class GradCheckReport:
    kind: str
    max_rel_error: Tuple[float, ...]

    @property
    def worst(self) -> float:
        return max(self.max_rel_error) if self.max_rel_error else 0.0

    def passed(self, tol: float = 1e-3) -> bool:
        return self.worst <= tol


def _away_from_zero(rng: np.random.Generator, shape: Sequence[int], low: float = 0.1) -> np.ndarray:
    mag = rng.uniform(low, 1.0, size=shape)
    return np.where(rng.random(size=shape) < 0.5, -mag, mag)


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), DENOM_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def check_function(
    fn: Callable[[List[Tensor]], Tensor],
    arrays: Sequence[np.ndarray],
    seed: int = 0,
    label: str = "function",
    step: float = STEP,
) -> GradCheckReport:
    """Compare the tape gradient of sum(fn(inputs) * R) against central differences."""
    with default_dtype(np.float64):
        base = [np.array(a, dtype=np.float64) for a in arrays]
        R = np.random.default_rng(seed + 7919).standard_normal(np.shape(fn([constant(a) for a in base]).data))

        def objective(values: Sequence[np.ndarray]) -> float:
            out = fn([constant(v) for v in values])
            return float(np.sum(out.data * R))

        inputs = [Tensor(a.copy(), requires_grad=True) for a in base]
        with Tape() as tape:
            out = fn(inputs)
            loss = ops.sum_all(ops.mul(out, constant(R)))
        tape.backward(loss)

        errors = []
        for i, t in enumerate(inputs):
            analytic = t.grad if t.grad is not None else np.zeros_like(base[i])
            numeric = np.zeros_like(base[i])
            for idx in np.ndindex(base[i].shape):
                plus = [v.copy() for v in base]
                minus = [v.copy() for v in base]
                plus[i][idx] += step
                minus[i][idx] -= step
                numeric[idx] = (objective(plus) - objective(minus)) / (2.0 * step)
            errors.append(_relative_error(analytic, numeric))
    return GradCheckReport(label, tuple(errors))


def _bn_fn(training: bool = True) -> Callable[[List[Tensor]], Tensor]:
    def fn(ts: List[Tensor]) -> Tensor:
        c = ts[1].shape[0]
        state = ops.BatchNormState(np.zeros(c), np.ones(c))
        return ops.batch_norm(ts[0], ts[1], ts[2], state, training=training)
    return fn


def _case(kind: PrimitiveKind, shape: Tuple[int, ...], rng: np.random.Generator):
    """(fn, input arrays) exercising one primitive at a random point of the given shape."""
    x = rng.standard_normal(shape)
    if kind is PrimitiveKind.TANH:
        return (lambda ts: ops.tanh(ts[0])), [x]
    if kind is PrimitiveKind.RELU:
        return (lambda ts: ops.relu(ts[0])), [_away_from_zero(rng, shape)]
    if kind is PrimitiveKind.SOFTMAX:
        return (lambda ts: ops.softmax(ts[0], axis=-1)), [x]
    if kind is PrimitiveKind.SIGNED_SQRT:
        return (lambda ts: ops.signed_sqrt(ts[0], 1e-5)), [_away_from_zero(rng, shape)]
    if kind is PrimitiveKind.SCALE:
        return (lambda ts: ops.scale(ts[0], 0.37)), [x]
    if kind is PrimitiveKind.GLOBAL_AVG_POOL:
        return (lambda ts: ops.global_avg_pool(ts[0])), [x]
    if kind is PrimitiveKind.RESIDUAL_ADD:
        return (lambda ts: ops.residual_add(ts[0], ts[1])), [x, rng.standard_normal(shape)]
    if kind is PrimitiveKind.CONCAT:
        return (lambda ts: ops.concat_channels(ts)), [x, rng.standard_normal(shape)]
    if kind is PrimitiveKind.MATMUL:
        b = rng.standard_normal((shape[-1], 3))
        return (lambda ts: ops.matmul(ts[0], ts[1])), [x, b]
    if kind is PrimitiveKind.HADAMARD:
        m = rng.standard_normal(shape[:-3] + shape[-2:])
        return (lambda ts: ops.hadamard(ts[0], ts[1])), [x, m]
    if kind is PrimitiveKind.POINTWISE_LINEAR:
        c = shape[-3]
        w, b = rng.standard_normal((c + 1, c)), rng.standard_normal(c + 1)
        return (lambda ts: ops.pointwise_linear(ts[0], ts[1], ts[2])), [x, w, b]
    if kind is PrimitiveKind.GROUPED_POINTWISE_LINEAR:
        c = shape[-3]
        groups = 2 if c % 2 == 0 else 1
        w = rng.standard_normal((c, c // groups))
        return (lambda ts: ops.grouped_pointwise_linear(ts[0], ts[1], groups)), [x, w]
    if kind is PrimitiveKind.BATCH_NORM:
        c = shape[-3] if len(shape) >= 3 else shape[-1]
        gamma, beta = rng.uniform(0.5, 1.5, c), rng.standard_normal(c)
        return _bn_fn(), [x, gamma, beta]
    raise ValueError(f"No gradient check defined for {kind!r}")


def grad_check(kind: PrimitiveKind, shape: Sequence[int], seed: int) -> GradCheckReport:
    """Per-input max relative error of one primitive against central differences."""
    rng = np.random.default_rng(seed)
    fn, arrays = _case(kind, tuple(shape), rng)
    return check_function(fn, arrays, seed=seed, label=kind.value)
