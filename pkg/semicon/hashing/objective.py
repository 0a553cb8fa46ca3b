from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from semicon.core import ops
from semicon.core.tensor import Tensor, constant
from semicon.errors import ShapeError
from .codes import CodeDatabase, SimilarityMatrix


@dataclass(frozen=True)
class LossTerms:
    pairwise: Tensor
    quantization: Tensor
    total: Tensor


def hash_loss(V: Tensor, db: CodeDatabase, S: SimilarityMatrix, omega, beta: float, gamma: float) -> LossTerms:
    """
    β·Σ_ij w_ij (V_iᵀz_j − k·S_ij)² + γ·Σ_i ‖z_ω(i) − V_i‖²
    V holds relaxed (tanh) codes of the sampled queries; row i of V, S and
    omega describe the same query.
    """
    omega = np.asarray(omega, dtype=np.int64)
    q, k = V.shape if V.ndim == 2 else (0, 0)
    if V.ndim != 2 or k != db.k:
        raise ShapeError(f"relaxed codes {V.shape} do not match code length {db.k}")
    if S.shape != (q, db.size) or omega.shape != (q,):
        raise ShapeError(f"similarity {S.shape} / positions {omega.shape} do not match {q} queries × {db.size} points")
    if q and (omega.min() < 0 or omega.max() >= db.size):
        raise ValueError(f"query position outside the database (size {db.size}): {omega.tolist()}")
    if np.any(np.abs(V.data) > 1.0):
        raise ValueError("relaxed codes must lie in [-1, 1]; apply tanh first")

    Z = db.codes.astype(np.float64)
    diff = ops.sub(ops.matmul(V, constant(Z.T)), constant(k * S.S.astype(np.float64)))
    pairwise = ops.scale(ops.sum_all(ops.mul(ops.square(diff), constant(S.weights))), beta)
    quantization = ops.scale(ops.sum_all(ops.square(ops.sub(constant(Z[omega]), V))), gamma)
    return LossTerms(pairwise, quantization, ops.add(pairwise, quantization))
