# semicon/retrieval/metrics.py
# Retrieval quality over full rankings.
# - relevance = same class label
# - AP = mean over relevant positions r of (hits so far / r)
# - queries without any relevant database item are skipped and counted

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from semicon.errors import ShapeError

log = logging.getLogger("semicon.metrics")

PRECISION_CUTOFFS: Tuple[int, ...] = (10, 50)


@dataclass(frozen=True)
class EvalReport:
    map: float
    average_precisions: Tuple[float, ...]
    query_count: int
    skipped: int = 0
    precision_at: Dict[int, float] = field(default_factory=dict)


def average_precision(relevance) -> Optional[float]:
    """AP of one ranked 0/1 relevance vector; None when nothing is relevant."""
    rel = np.asarray(relevance, dtype=bool)
    hits = np.flatnonzero(rel)
    if hits.size == 0:
        return None
    return float(np.mean(np.arange(1, hits.size + 1) / (hits + 1)))


def mean_average_precision(
    rankings: Sequence[np.ndarray],
    query_labels,
    db_labels,
    cutoffs: Sequence[int] = PRECISION_CUTOFFS,
) -> EvalReport:
    """rankings[q] lists database positions for query q, best first."""
    query_labels = np.asarray(query_labels)
    db_labels = np.asarray(db_labels)
    if len(rankings) != len(query_labels):
        raise ShapeError(f"{len(rankings)} rankings for {len(query_labels)} queries")

    aps = []
    prec = {K: [] for K in cutoffs if K <= len(db_labels)}
    skipped = 0
    for ranking, label in zip(rankings, query_labels):
        rel = db_labels[np.asarray(ranking, dtype=np.int64)] == label
        ap = average_precision(rel)
        if ap is None:
            skipped += 1
            continue
        aps.append(ap)
        for K in prec:
            prec[K].append(float(rel[:K].mean()))

    if skipped:
        log.warning("%d of %d queries have no relevant database item; excluded from mAP", skipped, len(rankings))
    return EvalReport(
        map=float(np.mean(aps)) if aps else 0.0,
        average_precisions=tuple(aps),
        query_count=len(aps),
        skipped=skipped,
        precision_at={K: float(np.mean(v)) for K, v in prec.items() if v},
    )


def format_report(report: EvalReport) -> str:
    lines = [
        f"map = {report.map:.4f}",
        f"queries = {report.query_count}",
        f"skipped = {report.skipped}",
    ]
    lines += [f"precision_at_{K} = {v:.4f}" for K, v in sorted(report.precision_at.items())]
    lines.append("average_precisions = " + ",".join(f"{ap:.6f}" for ap in report.average_precisions))
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_report(report), encoding="utf-8")
    return path
