from __future__ import annotations

from typing import Dict, Iterator, List, Optional

import numpy as np

from semicon.core import ops
from semicon.core.tensor import Parameter, Tensor
from semicon.errors import ConfigError, FileFormatError


class Module:
    """Minimal module tree: parameters, named state, train/eval switch."""

    preserves_spatial = False

    def __init__(self) -> None:
        self.training = True

    def children(self) -> Iterator["Module"]:
        for value in vars(self).values():
            if isinstance(value, Module):
                yield value
            elif isinstance(value, (list, tuple)):
                yield from (v for v in value if isinstance(v, Module))

    def own_parameters(self) -> List[Parameter]:
        params = []
        for value in vars(self).values():
            if isinstance(value, Parameter):
                params.append(value)
            elif isinstance(value, (list, tuple)):
                params.extend(v for v in value if isinstance(v, Parameter))
        return params

    def own_buffers(self) -> Dict[str, np.ndarray]:
        return {}

    def parameters(self) -> List[Parameter]:
        params = list(self.own_parameters())
        for child in self.children():
            params.extend(child.parameters())
        return params

    def state(self) -> Dict[str, np.ndarray]:
        """Every parameter and buffer by name, in construction order."""
        out: Dict[str, np.ndarray] = {p.name: p.data for p in self.own_parameters()}
        out.update(self.own_buffers())
        for child in self.children():
            for name, arr in child.state().items():
                if name in out:
                    raise ConfigError(f"Duplicate state name {name!r} in model")
                out[name] = arr
        return out

    def load_state(self, tensors: Dict[str, np.ndarray]) -> None:
        current = self.state()
        missing = sorted(set(current) - set(tensors))
        unexpected = sorted(set(tensors) - set(current))
        if missing or unexpected:
            raise FileFormatError(
                f"Checkpoint does not match model (missing {missing[:5]}, unexpected {unexpected[:5]})",
                field="name",
            )
        for name, arr in current.items():
            src = tensors[name]
            if src.shape != arr.shape:
                raise FileFormatError(f"Tensor {name!r} has shape {src.shape}, model expects {arr.shape}", field="extents")
            arr[...] = src

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for child in self.children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):  # pragma: no cover - abstract
        raise NotImplementedError


def he_normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


class Identity(Module):
    preserves_spatial = True

    def forward(self, x: Tensor) -> Tensor:
        return x


class PointwiseLinear(Module):
    """1×1 convolution (optionally grouped)."""

    preserves_spatial = True

    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        rng: Optional[np.random.Generator] = None,
        groups: int = 1,
        bias: bool = True,
        init: str = "he",
    ):
        super().__init__()
        if in_channels % groups or out_channels % groups:
            raise ConfigError(f"{name}: groups={groups} must divide {in_channels} and {out_channels}")
        self.groups = groups
        shape = (out_channels, in_channels // groups)
        if init == "zeros":
            w = np.zeros(shape)
        elif init == "identity":
            if out_channels != in_channels:
                raise ConfigError(f"{name}: identity init needs in == out channels, got {shape}")
            w = np.tile(np.eye(shape[1]), (groups, 1))
        elif init == "he":
            w = he_normal(rng or np.random.default_rng(0), shape, shape[1])
        else:
            raise ConfigError(f"{name}: unknown init {init!r}")
        self.weight = Parameter(f"{name}.weight", w)
        self.bias = Parameter(f"{name}.bias", np.zeros(out_channels)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        if self.groups == 1:
            return ops.pointwise_linear(x, self.weight, self.bias)
        return ops.grouped_pointwise_linear(x, self.weight, self.groups, self.bias)


class BatchNorm(Module):
    preserves_spatial = True

    def __init__(self, name: str, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.name = name
        self.gamma = Parameter(f"{name}.gamma", np.ones(channels))
        self.beta = Parameter(f"{name}.beta", np.zeros(channels))
        self.stats = ops.BatchNormState(
            running_mean=np.zeros(channels, dtype=np.float32),
            running_var=np.ones(channels, dtype=np.float32),
            momentum=momentum,
            eps=eps,
        )

    def own_buffers(self) -> Dict[str, np.ndarray]:
        return {
            f"{self.name}.running_mean": self.stats.running_mean,
            f"{self.name}.running_var": self.stats.running_var,
        }

    def forward(self, x: Tensor) -> Tensor:
        return ops.batch_norm(x, self.gamma, self.beta, self.stats, training=self.training)


class TransformBlock(Module):
    """Channel-preserving [pointwise-linear -> batch-norm -> relu -> pointwise-linear]."""

    preserves_spatial = True

    def __init__(self, name: str, channels: int, rng: np.random.Generator):
        super().__init__()
        self.inner = PointwiseLinear(f"{name}.pw1", channels, channels, rng)
        self.norm = BatchNorm(f"{name}.bn", channels)
        self.outer = PointwiseLinear(f"{name}.pw2", channels, channels, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.outer(ops.relu(self.norm(self.inner(x))))
