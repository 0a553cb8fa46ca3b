# semicon/hashing/codes.py
# Discrete side of the alternating optimisation.
# - binarize: sign with sign(0) = +1
# - CodeDatabase: Z (p×k over ±1) with ids and class labels
# - update_database_codes: one bitwise coordinate-descent sweep over Z,
#   the objective (β·pairwise + γ-term) never increases

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from semicon.errors import ShapeError

log = logging.getLogger("semicon.codes")

CODE_DTYPE = np.int8


def binarize(v) -> np.ndarray:
    """+1 where v >= 0, else -1 (int8)."""
    return np.where(np.asarray(v) >= 0, 1, -1).astype(CODE_DTYPE)


def _check_signs(name: str, codes: np.ndarray) -> None:
    if not np.all((codes == 1) | (codes == -1)):
        raise ValueError(f"{name} must contain only -1 and +1")


@dataclass
class CodeDatabase:
    codes: np.ndarray
    ids: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.codes = np.asarray(self.codes, dtype=CODE_DTYPE)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.codes.ndim != 2:
            raise ShapeError(f"code database must be p×k, got {self.codes.shape}")
        if len(self.ids) != self.size or len(self.labels) != self.size:
            raise ShapeError(
                f"code database has {self.size} rows but {len(self.ids)} ids and {len(self.labels)} labels"
            )
        _check_signs("database codes", self.codes)

    @property
    def size(self) -> int:
        return self.codes.shape[0]

    @property
    def k(self) -> int:
        return self.codes.shape[1]

    @classmethod
    def random(cls, ids: Sequence[int], labels: Sequence[int], k: int, seed: int) -> "CodeDatabase":
        rng = np.random.default_rng(seed)
        codes = np.where(rng.random((len(ids), k)) < 0.5, -1, 1)
        return cls(codes, ids, labels)


@dataclass(frozen=True)
class SimilarityMatrix:
    """S (q×p over ±1) and the per-pair weights of the objective (all ones unless soft-constrained)."""

    S: np.ndarray
    weights: np.ndarray

    def rows(self, index) -> "SimilarityMatrix":
        return SimilarityMatrix(self.S[index], self.weights[index])

    @property
    def shape(self):
        return self.S.shape


def similarity_matrix(query_labels, db_labels, soft_constraint: bool = False) -> SimilarityMatrix:
    q = np.asarray(query_labels)
    d = np.asarray(db_labels)
    same = q[:, None] == d[None, :]
    S = np.where(same, 1, -1).astype(CODE_DTYPE)
    weights = np.ones(S.shape, dtype=np.float64)
    if soft_constraint:
        positives = int(same.sum())
        if positives:
            weights[same] = (same.size - positives) / positives
    return SimilarityMatrix(S, weights)


def sample_queries(gamma, n: int, seed: int) -> np.ndarray:
    """Uniform sample of n database positions without replacement."""
    pool = np.arange(gamma) if np.ndim(gamma) == 0 else np.asarray(gamma, dtype=np.int64)
    if n < 0 or n > len(pool):
        raise ValueError(f"cannot sample {n} queries from {len(pool)} database points")
    return np.random.default_rng(seed).choice(pool, size=n, replace=False)


def _check_problem(U: np.ndarray, Z: np.ndarray, S: SimilarityMatrix, omega: np.ndarray) -> None:
    if U.ndim != 2 or U.shape[1] != Z.shape[1]:
        raise ShapeError(f"query codes {U.shape} do not match database codes {Z.shape}")
    if S.shape != (U.shape[0], Z.shape[0]):
        raise ShapeError(f"similarity matrix {S.shape} does not match {U.shape[0]} queries × {Z.shape[0]} points")
    if omega.shape != (U.shape[0],):
        raise ShapeError(f"{len(omega)} query positions for {U.shape[0]} query codes")
    if len(omega) and (omega.min() < 0 or omega.max() >= Z.shape[0]):
        raise ValueError(f"query positions must index the database (0..{Z.shape[0] - 1})")


def code_objective(U, Z, S: SimilarityMatrix, k: int, omega, gamma: float, beta: float = 1.0) -> float:
    """β Σ w_ij (u_iᵀz_j − k·S_ij)² + γ Σ_i ‖z_ω(i) − u_i‖²."""
    U = np.asarray(U, dtype=np.float64)
    Zf = np.asarray(Z, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.int64)
    _check_problem(U, Zf, S, omega)
    pairwise = float((S.weights * (U @ Zf.T - k * S.S) ** 2).sum())
    quantization = float(((Zf[omega] - U) ** 2).sum())
    return beta * pairwise + gamma * quantization


def update_database_codes(
    U,
    db: CodeDatabase,
    S: SimilarityMatrix,
    k: int,
    omega,
    gamma: float,
    beta: float = 1.0,
    tol: Optional[float] = None,
) -> CodeDatabase:
    """
    One sweep over the bit columns of Z. For bit b the objective restricted to
    z_jb is -2·z_jb·c_j with
        c_j = β Σ_i w_ij U_ib (k S_ij − r_ij) + γ Σ_{i: ω(i)=j} U_ib,
        r_ij = Σ_{b'≠b} U_ib' z_jb',
    so z_jb = sign(c_j) (+1 on ties) is the exact per-bit minimiser.
    """
    U = np.asarray(U, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.int64)
    Z = db.codes.astype(np.float64)
    _check_problem(U, Z, S, omega)
    if k != db.k:
        raise ShapeError(f"k={k} does not match database code length {db.k}")

    before = code_objective(U, Z, S, k, omega, gamma, beta)
    W = S.weights
    target = k * S.S.astype(np.float64)
    inner = U @ Z.T
    for b in range(k):
        rest = inner - np.outer(U[:, b], Z[:, b])
        c = beta * (W * U[:, b][:, None] * (target - rest)).sum(axis=0)
        c += gamma * np.bincount(omega, weights=U[:, b], minlength=Z.shape[0])
        Z[:, b] = np.where(c >= 0, 1.0, -1.0)
        inner = rest + np.outer(U[:, b], Z[:, b])

    after = code_objective(U, Z, S, k, omega, gamma, beta)
    slack = tol if tol is not None else 1e-9 * max(1.0, abs(before))
    if after > before + slack:
        raise RuntimeError(f"database code sweep increased the objective: {before!r} -> {after!r}")
    log.debug("Code sweep: objective %.6g -> %.6g", before, after)
    return CodeDatabase(Z.astype(CODE_DTYPE), db.ids, db.labels)
