from __future__ import annotations

import numpy as np

from semicon.core import ops
from semicon.core.tensor import Parameter, Tensor
from semicon.errors import ShapeError
from .layers import BatchNorm, Module, he_normal


class ConvBlock(Module):
    """3×3 convolution -> batch-norm -> relu -> 2×2 average pool (stride 2)."""

    def __init__(self, name: str, in_channels: int, out_channels: int, rng: np.random.Generator):
        super().__init__()
        self.weight = Parameter(f"{name}.conv.weight", he_normal(rng, (out_channels, in_channels, 3, 3), 9 * in_channels))
        self.bias = Parameter(f"{name}.conv.bias", np.zeros(out_channels))
        self.norm = BatchNorm(f"{name}.bn", out_channels)

    def forward(self, x: Tensor) -> Tensor:
        return ops.avg_pool2(ops.relu(self.norm(ops.conv3x3(x, self.weight, self.bias))))


class FeatureExtractor(Module):
    """Small stand-in backbone: two conv blocks, B×C_in×H×W -> B×C×(H/4)×(W/4)."""

    def __init__(self, in_channels: int, hidden_channels: int, out_channels: int, rng: np.random.Generator):
        super().__init__()
        self.in_channels = in_channels
        self.block1 = ConvBlock("extractor.block1", in_channels, hidden_channels, rng)
        self.block2 = ConvBlock("extractor.block2", hidden_channels, out_channels, rng)

    def forward(self, x: Tensor) -> Tensor:
        return feature_extractor(x, self)


def feature_extractor(x: Tensor, extractor: FeatureExtractor) -> Tensor:
    if x.ndim != 4 or x.shape[1] != extractor.in_channels or x.shape[2] % 4 or x.shape[3] % 4:
        raise ShapeError(
            f"feature extractor: expected B×{extractor.in_channels}×H×W with H, W divisible by 4, got {x.shape}"
        )
    return extractor.block2(extractor.block1(x))
