from __future__ import annotations

from typing import Optional


class ShapeError(ValueError):
    """Input extents do not conform to an operation's signature."""


class NonFiniteError(ValueError):
    """A NaN or infinity reached a primitive."""


class TapeError(RuntimeError):
    """Misuse of the autodiff tape (replayed twice, missing gradients)."""


class ConfigError(ValueError):
    """Invalid configuration value, unknown key or inconsistent combination."""


class FileFormatError(ValueError):
    """A checkpoint, index or dataset file failed validation."""

    def __init__(self, message: str, offset: Optional[int] = None, field: Optional[str] = None):
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if offset is not None:
            where.append(f"offset {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.offset = offset
        self.field = field


class TrainingDivergedError(RuntimeError):
    """The training objective became NaN or infinite."""

    def __init__(self, iteration: int, epoch: int, batch_seed: int, value: float):
        super().__init__(
            f"Non-finite loss {value!r} at iteration {iteration}, epoch {epoch} "
            f"(batch seed {batch_seed})"
        )
        self.iteration = iteration
        self.epoch = epoch
        self.batch_seed = batch_seed
