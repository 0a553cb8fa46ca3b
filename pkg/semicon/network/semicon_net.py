# semicon/network/semicon_net.py
# Full two-branch hashing network.
# - extractor -> T
# - global branch: phi_global(T) -> ICON -> pool
# - local branch: SEM stages mask T m times -> phi_local (shared) -> ICON per stage -> pool
# - m+1 linear encoders -> v = [v_global; v_local_1; ...; v_local_m]
# Variants drop parts of this graph for the ablation runs.

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from semicon.core import ops
from semicon.core.tensor import Tensor
from semicon.hashing.head import HashHead
from semicon.hashing.layout import CodeLayout, code_layout
from semicon.models.enums import Variant
from semicon.models.settings import RunConfig
from .extractor import FeatureExtractor
from .icon import IconTransform
from .layers import Identity, Module, TransformBlock
from .sem import SemAttention

log = logging.getLogger("semicon.net")


@dataclass
class NetOutput:
    v: Tensor                                   # B×k, before tanh / sign
    maps: List[Tensor] = field(default_factory=list)


class SemiconNet(Module):
    def __init__(self, cfg: RunConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.variant = cfg.model.variant
        rng = np.random.default_rng(cfg.seed)
        c = cfg.model.feature_channels
        k = cfg.model.code_bits
        use_local = self.variant is not Variant.BASELINE
        use_icon = self.variant is Variant.FULL

        self.layout: CodeLayout = code_layout(k, cfg.stage.m) if use_local else CodeLayout.global_only(k)
        self.extractor = FeatureExtractor(cfg.model.in_channels, cfg.model.hidden_channels, c, rng)
        self.phi_global = TransformBlock("phi_global", c, rng)
        self.icon_global: Module = IconTransform("icon.global", c, cfg.icon, rng) if use_icon else Identity()

        self.sem: Optional[SemAttention] = SemAttention(c, cfg.stage, rng) if use_local else None
        self.phi_local: Optional[TransformBlock] = TransformBlock("phi_local", c, rng) if use_local else None
        self.icon_locals: List[Module] = [
            IconTransform(f"icon.local{i}", c, cfg.icon, rng) if use_icon else Identity()
            for i in range(1, self.layout.m + 1)
        ]
        self.head = HashHead(self.layout, c, rng)
        self.state()  # rejects duplicate state names up front
        log.debug("Built %s network: layout %s, %d parameters",
                  self.variant.value, self.layout.lengths, sum(p.size for p in self.parameters()))

    @property
    def icon_transforms(self) -> List[IconTransform]:
        return [m for m in (self.icon_global, *self.icon_locals) if isinstance(m, IconTransform)]

    def forward(self, x: Tensor) -> NetOutput:
        T = self.extractor(x)
        x_global = ops.global_avg_pool(self.icon_global(self.phi_global(T)))
        x_locals: List[Tensor] = []
        maps: List[Tensor] = []
        if self.sem is not None:
            stages = self.sem(T)
            maps = stages.maps
            for masked, icon in zip(stages.masked, self.icon_locals):
                x_locals.append(ops.global_avg_pool(icon(self.phi_local(masked))))
        return NetOutput(self.head(x_global, x_locals), maps)

    def relaxed_codes(self, x: Tensor) -> Tensor:
        return ops.tanh(self.forward(x).v)
