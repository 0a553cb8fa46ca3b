from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from semicon.core.checkpoint import load_checkpoint, save_checkpoint
from semicon.data.synthetic import SyntheticDataset, generate_synthetic, load_dataset, save_dataset
from semicon.hashing.trainer import TrainResult, train, write_trace
from semicon.imaging.attention_dump import export_attention_maps
from semicon.models.config_io import load_config, write_config
from semicon.models.enums import Split, Variant
from semicon.models.settings import RunConfig
from semicon.network.semicon_net import SemiconNet
from semicon.retrieval.index_file import read_index, write_index
from semicon.retrieval.metrics import EvalReport, mean_average_precision, write_report
from semicon.retrieval.packing import PackedCodeMatrix, pack_codes
from semicon.retrieval.search import Ranking, search_many
from semicon.utils.logging_utils import ProgressCb, log_section
from semicon.workers.encode_worker import EncodeWorker


def sidecar_config_path(checkpoint: Path) -> Path:
    return Path(f"{checkpoint}.cfg")


def trace_path_for(checkpoint: Path) -> Path:
    return Path(checkpoint).with_suffix(".trace.csv")


class JobController:
    """Runs the command-level jobs: generate, train, encode, search, eval, ablate."""

    def __init__(self, logger: Optional[logging.Logger] = None, progress_cb: ProgressCb = None):
        self.logger = logger or logging.getLogger("semicon")
        self.progress_cb = progress_cb

    # ---------------------------- data ----------------------------

    def dataset_for(self, cfg: RunConfig, data_path: str | Path | None = None) -> SyntheticDataset:
        path = data_path or cfg.dataset_path
        return load_dataset(path) if path else generate_synthetic(cfg.data)

    def generate(self, cfg: RunConfig, out: str | Path) -> Path:
        path = save_dataset(generate_synthetic(cfg.data), out)
        self.logger.info("Dataset written: %s", path)
        return path

    # ---------------------------- training ----------------------------

    def train_model(self, cfg: RunConfig, dataset: Optional[SyntheticDataset] = None) -> TrainResult:
        cfg.validate()
        dataset = dataset if dataset is not None else self.dataset_for(cfg)
        model = SemiconNet(cfg)
        return train(dataset, model, cfg.train, seed=cfg.seed, progress_cb=self.progress_cb)

    def train(self, cfg: RunConfig, out: str | Path) -> TrainResult:
        out = Path(out)
        result = self.train_model(cfg)
        save_checkpoint(out, result.model.state())
        write_config(cfg, sidecar_config_path(out))
        write_trace(result.trace, trace_path_for(out))
        self.logger.info("Checkpoint written: %s (config %s)", out, sidecar_config_path(out).name)
        return result

    def load_model(self, checkpoint: str | Path) -> SemiconNet:
        checkpoint = Path(checkpoint)
        cfg_path = sidecar_config_path(checkpoint)
        if not cfg_path.exists():
            raise FileNotFoundError(f"Model config not found next to checkpoint: {cfg_path}")
        model = SemiconNet(load_config(cfg_path))
        model.load_state(load_checkpoint(checkpoint))
        return model.eval()

    # ---------------------------- encode / search / eval ----------------------------

    def encode_split(self, model: SemiconNet, dataset: SyntheticDataset, split: Split, maps_dir: str | Path | None = None):
        images, labels, _ = dataset.split(split)
        result = EncodeWorker(model, images, progress_cb=self.progress_cb).run()
        if result is None:
            raise RuntimeError("Encoding was cancelled")
        if maps_dir is not None and result.first_maps:
            export_attention_maps(result.first_maps, maps_dir, stem=f"{split.value}0")
        layout = model.layout.lengths if model.layout.m else ()
        return pack_codes(result.codes, labels, layout)

    def encode(
        self,
        model_path: str | Path,
        out: str | Path,
        data_path: str | Path | None = None,
        split: Split = Split.DATABASE,
        maps_dir: str | Path | None = None,
    ) -> PackedCodeMatrix:
        model = self.load_model(model_path)
        with log_section(f"Encoding {split.value} split", self.logger):
            packed = self.encode_split(model, self.dataset_for(model.cfg, data_path), split, maps_dir)
        write_index(out, packed)
        self.logger.info("Index written: %s (%d codes, k=%d)", out, packed.count, packed.k)
        return packed

    def search(self, index: str | Path, query_index: str | Path, topk: int) -> List[Ranking]:
        return search_many(read_index(query_index), read_index(index), topk, self.progress_cb)

    def evaluate_packed(self, db: PackedCodeMatrix, queries: PackedCodeMatrix) -> EvalReport:
        rankings = search_many(queries, db, None, self.progress_cb)
        return mean_average_precision([r.indices for r in rankings], queries.labels, db.labels)

    def evaluate(self, index: str | Path, queries: str | Path, report_path: str | Path | None = None) -> EvalReport:
        with log_section("Evaluating", self.logger):
            report = self.evaluate_packed(read_index(index), read_index(queries))
        if report_path is not None:
            write_report(report, report_path)
        return report

    # ---------------------------- ablation ----------------------------

    def ablate(
        self,
        cfg: RunConfig,
        seeds: Sequence[int],
        variants: Sequence[Variant] = tuple(Variant),
    ) -> Dict[Variant, List[float]]:
        """mAP per variant and seed, trained and evaluated in memory."""
        dataset = self.dataset_for(cfg)
        scores: Dict[Variant, List[float]] = {}
        for variant in variants:
            for seed in seeds:
                run = replace(cfg.with_variant(variant), seed=seed)
                with log_section(f"Ablation: {variant.value}, seed {seed}", self.logger):
                    model = self.train_model(run, dataset).model
                    db = self.encode_split(model, dataset, Split.DATABASE)
                    queries = self.encode_split(model, dataset, Split.QUERY)
                    score = self.evaluate_packed(db, queries).map
                self.logger.info("%s seed %d: mAP %.4f", variant.value, seed, score)
                scores.setdefault(variant, []).append(score)
        return scores


def mean_scores(scores: Dict[Variant, List[float]]) -> Dict[Variant, float]:
    return {v: float(np.mean(s)) for v, s in scores.items()}
