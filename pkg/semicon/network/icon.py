# semicon/network/icon.py
# Two-step interactive channel transformation (channels as tokens).
# - step 1: split C' channels into N portions of width d, attention inside each
#   portion (tokens = channels flattened over H'·W'), residual add
# - batch-norm + relu between the steps
# - step 2: recombine so portion i holds channel i of every step-1 portion
#   (d portions of width N), attention again, residual add
# - restore_order writes every channel back to its original index
# Attention logits go through sign(x)·sqrt(|x| + δ) before the row softmax.

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from semicon.core import ops
from semicon.core.tensor import Tensor
from semicon.errors import ConfigError, ShapeError
from semicon.models.settings import IconConfig
from .layers import BatchNorm, Module, PointwiseLinear


@dataclass(frozen=True)
class Portion:
    channels: Tensor
    origin: Tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.origin) != self.channels.shape[-3]:
            raise ShapeError(f"portion has {self.channels.shape[-3]} channels but {len(self.origin)} origin indices")
        if len(set(self.origin)) != len(self.origin):
            raise ShapeError(f"portion origin indices are not distinct: {self.origin}")

    @property
    def width(self) -> int:
        return len(self.origin)


@dataclass
class IconStats:
    """Token-pair scores computed per step; callers pass one in to opt in."""

    score_pairs: List[int] = field(default_factory=lambda: [0, 0])


def split_channels(G: Tensor, N: int) -> List[Portion]:
    c = G.shape[-3]
    if N < 1 or c % N:
        raise ConfigError(f"cannot split {c} channels into {N} equal portions")
    d = c // N
    return [
        Portion(ops.gather_channels(G, range(i * d, (i + 1) * d)), tuple(range(i * d, (i + 1) * d)))
        for i in range(N)
    ]


def scaled_channel_attention(q: Tensor, k: Tensor, v: Tensor, delta: float) -> Tensor:
    """softmax_rows(signed_sqrt(Q Kᵀ / sqrt(w))) · V over channel tokens; q, k, v are (..., w, H, W)."""
    w = q.shape[-3]
    lead, tokens = q.shape[:-3], q.shape[-2] * q.shape[-1]
    Q = ops.reshape(q, (*lead, w, tokens))
    K = ops.reshape(k, (*lead, w, tokens))
    V = ops.reshape(v, (*lead, w, tokens))
    scores = ops.scale(ops.matmul(Q, ops.swap_axes(K, -1, -2)), 1.0 / math.sqrt(w))
    A = ops.softmax(ops.signed_sqrt(scores, delta), axis=-1)
    return ops.reshape(ops.matmul(A, V), v.shape)


def channel_attention(portion: Portion, wq: Tensor, wk: Tensor, wv: Tensor, cfg: IconConfig) -> Portion:
    """Attention among the channels of one portion with explicit w×w projections."""
    x = portion.channels
    q = ops.pointwise_linear(x, wq)
    k = ops.pointwise_linear(x, wk)
    v = ops.pointwise_linear(x, wv)
    return Portion(scaled_channel_attention(q, k, v, cfg.delta), portion.origin)


def recombine(portions: Sequence[Portion]) -> List[Portion]:
    """N portions of width d -> d portions of width N; output i stacks channel i of each input."""
    if not portions:
        raise ShapeError("recombine: no portions")
    d = portions[0].width
    for p in portions:
        if p.width != d:
            raise ShapeError(f"recombine: portion widths differ ({p.width} vs {d})")
    n = len(portions)
    stacked = ops.concat_channels([p.channels for p in portions])
    out = []
    for i in range(d):
        idx = [a * d + i for a in range(n)]
        out.append(Portion(ops.gather_channels(stacked, idx), tuple(portions[a].origin[i] for a in range(n))))
    return out


def restore_order(portions: Sequence[Portion]) -> Tensor:
    origin = [o for p in portions for o in p.origin]
    c = len(origin)
    if sorted(origin) != list(range(c)):
        missing = sorted(set(range(c)) - set(origin))
        raise ShapeError(f"restore_order: origin indices are not a permutation of 0..{c - 1} (missing {missing})")
    stacked = ops.concat_channels([p.channels for p in portions])
    return ops.gather_channels(stacked, np.argsort(origin))


class IconStep(Module):
    """Q/K/V projections of one step; grouped mode gives every portion its own projection."""

    def __init__(self, name: str, groups: int, width: int, cfg: IconConfig, rng: np.random.Generator, init: str = "he"):
        super().__init__()
        self.groups = groups
        self.width = width
        self.delta = cfg.delta
        self.grouped = cfg.grouped
        channels = groups * width if cfg.grouped else width
        g = groups if cfg.grouped else 1
        self.q = PointwiseLinear(f"{name}.q", channels, channels, rng, groups=g, bias=False, init=init)
        self.k = PointwiseLinear(f"{name}.k", channels, channels, rng, groups=g, bias=False, init=init)
        self.v = PointwiseLinear(f"{name}.v", channels, channels, rng, groups=g, bias=False, init=init)

    def forward(self, portions: Sequence[Portion], stats: Optional[IconStats] = None, step: int = 0) -> List[Portion]:
        if len(portions) != self.groups or any(p.width != self.width for p in portions):
            raise ShapeError(
                f"icon step expects {self.groups} portions of width {self.width}, "
                f"got {[p.width for p in portions]}"
            )
        if self.grouped:
            stacked = ops.concat_channels([p.channels for p in portions])
            q_all, k_all, v_all = self.q(stacked), self.k(stacked), self.v(stacked)

            def span(t: Tensor, i: int) -> Tensor:
                return ops.gather_channels(t, range(i * self.width, (i + 1) * self.width))

            projected = [(span(q_all, i), span(k_all, i), span(v_all, i)) for i in range(self.groups)]
        else:
            projected = [(self.q(p.channels), self.k(p.channels), self.v(p.channels)) for p in portions]

        out = []
        for p, (q, k, v) in zip(portions, projected):
            attended = scaled_channel_attention(q, k, v, self.delta)
            out.append(Portion(ops.residual_add(attended, p.channels), p.origin))
        if stats is not None:
            stats.score_pairs[step] += self.groups * self.width * self.width
        return out


class IconTransform(Module):
    """ICON for one branch tensor; independent parameters per branch."""

    preserves_spatial = True

    def __init__(self, name: str, channels: int, cfg: IconConfig, rng: np.random.Generator, init: str = "he"):
        super().__init__()
        cfg.validate(channels)
        self.cfg = cfg
        self.channels = channels
        d = channels // cfg.portions
        self.step1 = IconStep(f"{name}.step1", cfg.portions, d, cfg, rng, init)
        self.norm = BatchNorm(f"{name}.bn", channels)
        self.step2 = IconStep(f"{name}.step2", d, cfg.portions, cfg, rng, init)

    def forward(self, G: Tensor, stats: Optional[IconStats] = None) -> Tensor:
        return icon_forward(G, self, stats)


def icon_forward(G: Tensor, transform: IconTransform, stats: Optional[IconStats] = None) -> Tensor:
    """Both ICON steps; `stats`, when given, accumulates the per-step score counts."""
    cfg = transform.cfg
    if G.shape[-3] != transform.channels:
        raise ShapeError(f"icon: expected {transform.channels} channels, got {G.shape}")
    portions = transform.step1(split_channels(G, cfg.portions), stats, 0)
    x = ops.relu(transform.norm(ops.concat_channels([p.channels for p in portions])))
    portions = transform.step2(recombine(split_channels(x, cfg.portions)), stats, 1)
    return restore_order(portions)
