from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

from semicon.errors import ConfigError


@dataclass(frozen=True)
class CodeLayout:
    """Bit split of u = [u_global; u_local_1; ...; u_local_m]."""

    k: int
    global_len: int
    local_lens: Tuple[int, ...]

    def __post_init__(self) -> None:
        if any(n < 1 for n in self.lengths):
            raise ConfigError(f"code lengths must all be >= 1, got {self.lengths}")
        if sum(self.lengths) != self.k:
            raise ConfigError(f"code lengths {self.lengths} do not sum to k={self.k}")

    @property
    def m(self) -> int:
        return len(self.local_lens)

    @property
    def lengths(self) -> Tuple[int, ...]:
        return (self.global_len, *self.local_lens)

    def slices(self) -> List[slice]:
        out, start = [], 0
        for n in self.lengths:
            out.append(slice(start, start + n))
            start += n
        return out

    @classmethod
    def global_only(cls, k: int) -> "CodeLayout":
        return cls(k, k, ())


def code_layout(k: int, m: int) -> CodeLayout:
    """
    floor(k / 2m) bits per local code, the rest global.
    For m = 3 this is the ceil(k/2) / floor(k/6) split; when the two do not add
    up to k (k = 32) the remainder goes to the global code.
    """
    if m < 1:
        raise ConfigError(f"m must be >= 1, got {m}")
    if k < m + 1:
        raise ConfigError(f"k={k} is too short for {m + 1} codes")
    per_local = k // (2 * m)
    if per_local == 0:
        raise ConfigError(f"k={k} leaves no bits for {m} local codes (floor(k / 2m) = 0)")
    return CodeLayout(k, k - m * per_local, (per_local,) * m)
