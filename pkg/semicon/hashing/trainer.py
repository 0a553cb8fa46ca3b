# semicon/hashing/trainer.py
# Alternating optimisation of network parameters and database codes.
# - outer loop (iterations): sample Ω from the database, build S for Ω × Γ
# - inner loop (epochs over Ω in mini-batches): tanh codes -> loss -> backward -> SGD
# - after the epochs: binarize the last relaxed codes of Ω and sweep Z once
# The gradient step uses the loss divided by p·batch; the trace keeps the raw terms.

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from semicon.core import ops
from semicon.core.optim import sgd_step
from semicon.core.tensor import Tape, constant
from semicon.errors import NonFiniteError, TrainingDivergedError
from semicon.models.settings import TrainConfig
from semicon.utils.logging_utils import ProgressCb, emit_progress, log_section
from .codes import CodeDatabase, binarize, sample_queries, similarity_matrix, update_database_codes
from .objective import hash_loss

log = logging.getLogger("semicon.train")

TRACE_HEADER = ("iteration", "epoch", "pairwise", "quantization", "total")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    epoch: int
    pairwise: float
    quantization: float
    total: float


@dataclass
class TrainResult:
    model: object
    database: CodeDatabase
    trace: List[TraceRow] = field(default_factory=list)


def write_trace(rows: List[TraceRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for row in rows:
            writer.writerow([row.iteration, row.epoch, f"{row.pairwise:.9g}", f"{row.quantization:.9g}", f"{row.total:.9g}"])
    return path


def train(
    dataset,
    model,
    cfg: TrainConfig,
    seed: int = 0,
    progress_cb: ProgressCb = None,
    trace_path: Optional[str | Path] = None,
) -> TrainResult:
    """
    dataset: SyntheticDataset (only its database split is touched)
    model: SemiconNet; trained in place and left in eval mode
    """
    cfg.validate()
    images, labels, ids = dataset.database_split()
    p = len(labels)
    k = model.layout.k
    params = model.parameters()
    master = np.random.default_rng(seed)
    db = CodeDatabase.random(ids, labels, k, seed)
    trace: List[TraceRow] = []
    n = min(cfg.sample_size, p)
    total_steps = cfg.iterations * cfg.epochs

    with log_section(f"Training {model.variant.value}: p={p}, |Ω|={n}, k={k}, {cfg.iterations}×{cfg.epochs}", log):
        for it in range(cfg.iterations):
            omega = sample_queries(p, n, int(master.integers(2**31)))
            S = similarity_matrix(labels[omega], labels, cfg.soft_constraint)
            relaxed = np.zeros((n, k), dtype=np.float64)

            for epoch in range(cfg.epochs):
                batch_seed = int(master.integers(2**31))
                order = np.random.default_rng(batch_seed).permutation(n)
                sums = np.zeros(2)
                model.train()
                for start in range(0, n, cfg.batch_size):
                    idx = order[start:start + cfg.batch_size]
                    try:
                        with Tape() as tape:
                            V = model.relaxed_codes(constant(images[omega[idx]]))
                            terms = hash_loss(V, db, S.rows(idx), omega[idx], cfg.beta, cfg.gamma)
                            value = terms.total.item()
                            if not np.isfinite(value):
                                raise TrainingDivergedError(it, epoch, batch_seed, value)
                            objective = ops.scale(terms.total, 1.0 / (p * len(idx)))
                        tape.backward(objective, params)
                    except NonFiniteError as exc:
                        raise TrainingDivergedError(it, epoch, batch_seed, float("nan")) from exc
                    sgd_step(params, cfg.lr, cfg.momentum, cfg.weight_decay)
                    relaxed[idx] = V.data
                    sums += (terms.pairwise.item(), terms.quantization.item())

                trace.append(TraceRow(it, epoch, float(sums[0]), float(sums[1]), float(sums.sum())))
                emit_progress(progress_cb, int(100 * (it * cfg.epochs + epoch + 1) / total_steps), log)

            db = update_database_codes(binarize(relaxed), db, S, k, omega, cfg.gamma, cfg.beta)
            row = trace[-1]
            log.info("Iteration %d/%d: pairwise %.4g, quantization %.4g, total %.4g",
                     it + 1, cfg.iterations, row.pairwise, row.quantization, row.total)

    model.eval()
    if trace_path is not None:
        write_trace(trace, trace_path)
        log.info("Objective trace written: %s", trace_path)
    return TrainResult(model, db, trace)


__all__ = ["TraceRow", "TrainResult", "train", "write_trace", "TRACE_HEADER"]
