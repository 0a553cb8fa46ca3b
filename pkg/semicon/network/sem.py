# semicon/network/sem.py
# Stage-by-stage attention of the local branch.
# - stage 1: P_1 = phi_att(T), M_1 = phi_1(P_1), T'_1 = M_1 ⊙ T
# - stage i: P_i = sem_transform(M_{i-1}) ⊙ P_{i-1}, M_i = phi_i(P_i), T'_i = M_i ⊙ T
# - sem_transform: softmax over all H·W cells, then 1 - (μ_k - mean) / max(std, floor)^α
#   (population std; cell-mean of the result is exactly 1; cell order reversed)

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from semicon.core import ops
from semicon.core.tensor import Tensor, constant, record_op
from semicon.errors import ConfigError, ShapeError
from semicon.models.enums import AttentionMode
from semicon.models.settings import StageConfig
from .layers import Module, PointwiseLinear, TransformBlock

log = logging.getLogger("semicon.sem")


@dataclass(frozen=True)
class AttentionState:
    guidance: Tensor
    map: Tensor
    stage: int


@dataclass
class StageOutputs:
    masked: List[Tensor] = field(default_factory=list)
    maps: List[Tensor] = field(default_factory=list)
    states: List[AttentionState] = field(default_factory=list)
    transforms: int = 0


def init_guidance(T: Tensor, phi_att: Module) -> Tensor:
    P = phi_att(T)
    if P.shape[-2:] != T.shape[-2:]:
        raise ShapeError(f"guidance network changed spatial extents {T.shape[-2:]} -> {P.shape[-2:]}")
    return P


def suppress_enhance(s: Tensor, alpha: float, std_floor: float = 1e-12) -> Tensor:
    """Affine reweighting of a distribution over the last axis: 1 - (s - mean) / max(std, floor)^alpha."""
    S = s.data.astype(np.float64)
    n = S.shape[-1]
    dev = S - S.mean(axis=-1, keepdims=True)
    std = np.sqrt((dev * dev).mean(axis=-1, keepdims=True))
    floored = np.maximum(std, std_floor)
    den = floored ** alpha
    out = 1.0 - dev / den
    live = std > std_floor

    def backward(g: np.ndarray):
        direct = -(g - g.mean(axis=-1, keepdims=True)) / den
        spread = np.where(live, alpha * floored ** (-alpha - 2.0) / n, 0.0)
        return (direct + spread * dev * (g * dev).sum(axis=-1, keepdims=True),)

    return record_op("sem-transform", out, (s,), backward)


def sem_transform(
    M_prev: Tensor,
    alpha: float,
    std_floor: float = 1e-12,
    mode: AttentionMode = AttentionMode.SEM,
    erase_threshold: float = 0.5,
) -> Tensor:
    """H×W weight map (any leading batch extents) derived from the previous attention map."""
    if M_prev.ndim < 2 or M_prev.shape[-1] * M_prev.shape[-2] < 1:
        raise ShapeError(f"sem_transform: expected a (..., H, W) map, got {M_prev.shape}")
    lead, (h, w) = M_prev.shape[:-2], M_prev.shape[-2:]
    if mode is AttentionMode.NONE:
        return constant(np.ones(M_prev.shape))
    s = ops.softmax(ops.reshape(M_prev, (*lead, h * w)), axis=-1)
    if mode is AttentionMode.ERASE:
        peak = s.data.max(axis=-1, keepdims=True)
        keep = (s.data < erase_threshold * peak).astype(np.float64)
        return constant(keep.reshape(M_prev.shape))
    return ops.reshape(suppress_enhance(s, alpha, std_floor), M_prev.shape)


def next_guidance(P_prev: Tensor, M_prev: Tensor, cfg: StageConfig) -> Tensor:
    weights = sem_transform(M_prev, cfg.alpha, cfg.std_floor, cfg.mode, cfg.erase_threshold)
    return ops.hadamard(P_prev, weights)


def attention_map(P: Tensor, head: PointwiseLinear) -> Tensor:
    """Single-channel map from the stage's own 1×1 convolution."""
    M = head(P)
    if M.shape[-3] != 1:
        raise ShapeError(f"attention head must produce one channel, got {M.shape[-3]}")
    return ops.reshape(M, M.shape[:-3] + M.shape[-2:])


def apply_mask(M: Tensor, T: Tensor) -> Tensor:
    return ops.hadamard(T, M)


def run_stages(T: Tensor, cfg: StageConfig, phi_att: Module, heads: Sequence[PointwiseLinear]) -> StageOutputs:
    cfg.validate()
    if len(heads) != cfg.m:
        raise ConfigError(f"run_stages: {len(heads)} attention heads for m={cfg.m} stages")
    out = StageOutputs()
    P: Optional[Tensor] = None
    M: Optional[Tensor] = None
    for i, head in enumerate(heads, 1):
        if i == 1:
            P = init_guidance(T, phi_att)
        else:
            P = next_guidance(P, M, cfg)
            out.transforms += 1
        M = attention_map(P, head)
        out.masked.append(apply_mask(M, T))
        out.maps.append(M)
        out.states.append(AttentionState(guidance=P, map=M, stage=i))
    return out


class SemAttention(Module):
    """phi_att plus one 1×1 head per stage."""

    def __init__(self, channels: int, cfg: StageConfig, rng: np.random.Generator, phi_att: Optional[Module] = None):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.phi_att = phi_att if phi_att is not None else TransformBlock("sem.phi_att", channels, rng)
        if not self.phi_att.preserves_spatial:
            raise ConfigError(f"guidance network {type(self.phi_att).__name__} does not preserve spatial extents")
        self.heads = [PointwiseLinear(f"sem.phi{i}", channels, 1, rng) for i in range(1, cfg.m + 1)]

    def forward(self, T: Tensor) -> StageOutputs:
        return run_stages(T, self.cfg, self.phi_att, self.heads)
