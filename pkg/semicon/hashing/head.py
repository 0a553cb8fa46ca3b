from __future__ import annotations

from typing import Sequence

import numpy as np

from semicon.core import ops
from semicon.core.tensor import Parameter, Tensor
from semicon.errors import ShapeError
from semicon.network.layers import Module
from .layout import CodeLayout


class HashHead(Module):
    """m+1 linear encoders: W_global and W_local_i, each stored as (feature_len, code_len)."""

    def __init__(self, layout: CodeLayout, feature_len: int, rng: np.random.Generator):
        super().__init__()
        self.layout = layout
        self.feature_len = feature_len
        names = ["head.global"] + [f"head.local{i}" for i in range(1, layout.m + 1)]
        self.encoders = [
            Parameter(name, rng.standard_normal((feature_len, n)) / np.sqrt(feature_len))
            for name, n in zip(names, layout.lengths)
        ]

    def forward(self, x_global: Tensor, x_locals: Sequence[Tensor]) -> Tensor:
        return project(x_global, x_locals, self)


def project(x_global: Tensor, x_locals: Sequence[Tensor], head: HashHead) -> Tensor:
    """v = [W_global·x_global; W_local_1·x_local_1; ...] for (C',) or (B, C') features."""
    feats = [x_global, *x_locals]
    if len(feats) != len(head.encoders):
        raise ShapeError(f"project: {len(feats)} features for {len(head.encoders)} encoders")
    single = x_global.ndim == 1
    parts = []
    for x, w in zip(feats, head.encoders):
        if x.shape[-1] != head.feature_len or x.ndim != x_global.ndim:
            raise ShapeError(f"project: feature of shape {x.shape} does not match encoder {w.name} {w.shape}")
        x2 = ops.reshape(x, (1, x.shape[0])) if single else x
        parts.append(ops.matmul(x2, w))
    v = ops.concat_channels(parts)
    return ops.reshape(v, (head.layout.k,)) if single else v
