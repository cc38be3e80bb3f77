"""Glue between the modules: training-set preparation and the synthetic benchmark."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import dbn, synth
from .errors import DataError
from .augment import AugmentConfig, augment_all
from .evaluation import EvaluationReport, encode_labeled, evaluate_model
from .geometry import ImageAnnotation, ThresholdSet, normalize_scale
from .rbm import CdConfig
from .seeding import derive_seed

logger = logging.getLogger(__name__)


def training_matrix(annotations: Sequence[ImageAnnotation],
                    thresholds: Optional[ThresholdSet] = None,
                    augment: Optional[AugmentConfig] = AugmentConfig()):
    """Normalize, optionally augment, and encode labeled annotations.

    Returns ``(X, y, skipped_ids)``.
    """
    prepared, skipped = [], []
    for a in annotations:
        try:
            prepared.append(normalize_scale(a))
        except DataError as exc:
            logger.warning("skipping image %s: %s", a.image_id, exc)
            skipped.append(a.image_id)
    if augment is not None:
        prepared = augment_all(prepared, augment)
    X, y, more = encode_labeled(prepared, thresholds)
    return X, y, skipped + more


@dataclass
class RecipeConfig:
    """Every knob of a full training run, seeded from one integer."""

    seed: int = 0
    lr_pretrain: float = 0.01
    epochs_pretrain: int = 100
    lr_finetune: float = 0.1
    epochs_finetune: int = 1000
    batch_size: int = 20
    k: int = 1
    hidden: tuple[int, int] = (200, 50)
    propagate: str = "mean"
    jitter_px: int = 10
    replicas: int = 10
    augment: bool = True

    def cd(self) -> CdConfig:
        return CdConfig(self.lr_pretrain, self.epochs_pretrain, self.batch_size, self.k,
                        derive_seed(self.seed, "pretrain"))

    def finetune(self) -> dbn.FineTuneConfig:
        return dbn.FineTuneConfig(self.lr_finetune, self.epochs_finetune, self.batch_size,
                                  derive_seed(self.seed, "finetune"))

    def augmentation(self) -> Optional[AugmentConfig]:
        if not self.augment:
            return None
        return AugmentConfig(self.jitter_px, self.replicas, derive_seed(self.seed, "augment"))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def train_dbn(annotations, recipe: RecipeConfig = RecipeConfig(),
              thresholds: Optional[ThresholdSet] = None, log=None):
    X, y, _ = training_matrix(annotations, thresholds, recipe.augmentation())
    model, traces = dbn.train(X, y, recipe.cd(), recipe.finetune(), hidden=recipe.hidden,
                              propagate=recipe.propagate, log=log)
    meta = dict(model.metadata)
    meta["recipe"] = recipe.to_dict()
    return dataclasses.replace(model, metadata=meta), traces


def train_shallow(annotations, recipe: RecipeConfig = RecipeConfig(),
                  thresholds: Optional[ThresholdSet] = None):
    X, y, _ = training_matrix(annotations, thresholds, recipe.augmentation())
    return synth.shallow_baseline(X, y, recipe.finetune())


@dataclass
class BenchmarkResult:
    dbn: EvaluationReport
    shallow: EvaluationReport
    traces: dict = field(default_factory=dict)


def run_benchmark(config: synth.SynthConfig, recipe: RecipeConfig = RecipeConfig(),
                  train_per_class: int = 100, test_per_class: int = 100,
                  thresholds: Optional[ThresholdSet] = None) -> BenchmarkResult:
    """Train the DBN and the shallow baseline on one synthetic split and evaluate both."""
    thresholds = thresholds or synth.default_thresholds()
    train, test = synth.generate_split(config, train_per_class, test_per_class)
    model, traces = train_dbn(train, recipe, thresholds)
    shallow, _ = train_shallow(train, recipe, thresholds)
    return BenchmarkResult(evaluate_model(model, test, thresholds),
                           evaluate_model(shallow, test, thresholds), traces)


def noise_sweep(model, config: synth.SynthConfig, miss_probs=(0.0, 0.25, 0.5, 1.0),
                test_per_class: int = 100, thresholds: Optional[ThresholdSet] = None) -> list[float]:
    """mAP of a fixed model on test sets regenerated with each miss probability."""
    thresholds = thresholds or synth.default_thresholds()
    maps = []
    for p in miss_probs:
        cfg = dataclasses.replace(config, miss_prob=p, images_per_class=test_per_class)
        maps.append(evaluate_model(model, synth.generate(cfg), thresholds).map)
    return maps


__all__ = ["RecipeConfig", "BenchmarkResult", "noise_sweep", "run_benchmark",
           "train_dbn", "train_shallow", "training_matrix"]
