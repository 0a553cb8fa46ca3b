from __future__ import annotations

from typing import Iterable

from semicon.errors import TapeError
from .tensor import Parameter


def sgd_step(params: Iterable[Parameter], lr: float, momentum: float, weight_decay: float) -> None:
    """
    One SGD-with-momentum update, then clear the gradients:
        buf <- momentum * buf + grad + weight_decay * param
        param <- param - lr * buf
    """
    params = list(params)
    for p in params:
        if p.grad is None:
            raise TapeError(f"Parameter {p.name!r} has no gradient; run backward() first")
    for p in params:
        p.momentum[...] = momentum * p.momentum + p.grad + weight_decay * p.data
        p.data[...] = p.data - lr * p.momentum
        p.grad = None
