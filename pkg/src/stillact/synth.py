"""Synthetic benchmark: templated annotations with detector noise, and a
softmax-regression baseline on the same features.

Each action class has a fixed body/object layout (``data/templates.json``).
A sample places the template at a random dyadic scale and integer offset,
then applies Gaussian coordinate noise, per-entity misses, optional false
object detections and detector scores.  Coordinates are rounded to a
1/1024 px grid so that mirroring about an integer image width is exact.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

import numpy as np

from .dbn import FineTuneConfig, log_softmax, minibatch_descent, softmax
from .errors import DimensionMismatch, EmptyBatch, EmptyDataset, InvalidConfig
from .evaluation import CLASS_NAMES
from .geometry import (LEG_PARTS, OBJECTS, VECTOR_DIM, CentralLine, DetectionRecord,
                       ImageAnnotation, ThresholdSet)
from .seeding import rng as make_rng

GRID = 1024.0
SCALES = (0.75, 1.0, 1.25, 1.5, 2.0)
WIDTH, HEIGHT = 640.0, 480.0


@lru_cache(maxsize=None)
def load_templates() -> dict:
    text = resources.files("stillact").joinpath("data/templates.json").read_text(encoding="utf-8")
    return json.loads(text)


def default_thresholds() -> ThresholdSet:
    return ThresholdSet.uniform(load_templates()["default_threshold"])


@dataclass(frozen=True)
class SynthConfig:
    images_per_class: int = 100
    coord_sigma: float = 0.0           # normalized px (head length 50)
    miss_prob: float = 0.0             # per non-head entity
    false_positive_prob: float = 0.0   # per object kind, per image
    upper_body_prob: float = 0.0
    true_score: tuple[float, float] = (0.5, 1.0)
    false_score: tuple[float, float] = (-1.0, 0.25)
    source: str = "detector"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "true_score", tuple(self.true_score))
        object.__setattr__(self, "false_score", tuple(self.false_score))
        if self.images_per_class < 0:
            raise InvalidConfig("images_per_class must be >= 0")
        if not self.coord_sigma >= 0:
            raise InvalidConfig("coord_sigma must be >= 0")
        for name in ("miss_prob", "false_positive_prob", "upper_body_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidConfig(f"{name} must lie in [0, 1], got {p}")
        for name in ("true_score", "false_score"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise InvalidConfig(f"{name} range is empty: {lo} > {hi}")
        if self.source not in ("manual", "detector"):
            raise InvalidConfig(f"unknown source {self.source!r}")


NOISELESS = SynthConfig()
NOISY = SynthConfig(coord_sigma=5.0, miss_prob=0.25)


def _quantize(x: float) -> float:
    return round(x * GRID) / GRID


def _place(coords, scale, ox, oy) -> CentralLine:
    x1, y1, x2, y2 = coords
    return CentralLine(_quantize(x1 * scale + ox), _quantize(y1 * scale + oy),
                       _quantize(x2 * scale + ox), _quantize(y2 * scale + oy))


def _sample_image(class_id: int, index: int, config: SynthConfig) -> ImageAnnotation:
    name = CLASS_NAMES[class_id]
    template = load_templates()["classes"][name]
    rng = make_rng(config.seed, "synth", class_id, index)
    scale = SCALES[rng.integers(len(SCALES))]
    ox = float(rng.integers(200, 441))
    oy = float(rng.integers(100, 201))
    upper = rng.random() < config.upper_body_prob

    dets = []
    for kind, coords in template.items():
        noise = rng.normal(0.0, 1.0, size=4) * config.coord_sigma
        missed = rng.random() < config.miss_prob
        score = rng.uniform(*config.true_score)
        if kind != "head" and (missed or (upper and kind in LEG_PARTS)):
            continue
        noisy = [c + e for c, e in zip(coords, noise)] if config.coord_sigma > 0 else coords
        dets.append(DetectionRecord(kind, _place(noisy, scale, ox, oy), float(score), config.source))
    for kind in OBJECTS:
        hit = rng.random() < config.false_positive_prob
        mx, my = rng.uniform(-150, 150), rng.uniform(-50, 300)
        half, theta = rng.uniform(20, 100), rng.uniform(0, math.pi)
        score = rng.uniform(*config.false_score)
        if hit:
            coords = (mx - half * math.cos(theta), my - half * math.sin(theta),
                      mx + half * math.cos(theta), my + half * math.sin(theta))
            dets.append(DetectionRecord(kind, _place(coords, scale, ox, oy), float(score), config.source))
    return ImageAnnotation(f"synth-{config.seed}-{class_id}-{index:05d}", WIDTH, HEIGHT,
                           tuple(dets), class_id, "upper" if upper else "full")


def generate(config: SynthConfig = NOISELESS) -> list[ImageAnnotation]:
    """``images_per_class`` labeled annotations per class, in seeded shuffled order."""
    out = [_sample_image(c, i, config)
           for c in range(len(CLASS_NAMES)) for i in range(config.images_per_class)]
    order = make_rng(config.seed, "synth-order").permutation(len(out))
    return [out[i] for i in order]


def generate_split(config: SynthConfig, train_per_class: int, test_per_class: int):
    """Disjoint train/test sets drawn from independent seed streams."""
    train = generate(dataclasses.replace(config, images_per_class=train_per_class))
    test = generate(dataclasses.replace(config, images_per_class=test_per_class,
                                        seed=config.seed + 1_000_003))
    return train, test


# --- shallow baseline -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SoftmaxRegression:
    W: np.ndarray
    b: np.ndarray

    @classmethod
    def zeros(cls, n_in: int = VECTOR_DIM, n_classes: int = len(CLASS_NAMES)):
        return cls(np.zeros((n_in, n_classes)), np.zeros(n_classes))

    def params(self):
        return {"W": self.W, "b": self.b}

    def forward(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.W.shape[0]:
            raise DimensionMismatch(f"feature has {X.shape[-1]} dims, model expects {self.W.shape[0]}")
        return softmax(X @ self.W + self.b)


def _softmax_loss_grad(params, X, y):
    n = X.shape[0]
    logp = log_softmax(X @ params["W"] + params["b"])
    rows = np.arange(n)
    loss = float(-logp[rows, y].mean())
    dz = np.exp(logp)
    dz[rows, y] -= 1.0
    dz /= n
    return loss, {"W": X.T @ dz, "b": dz.sum(axis=0)}


def softmax_loss_and_gradients(model: SoftmaxRegression, X, y):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyBatch("loss needs a non-empty batch")
    return _softmax_loss_grad(model.params(), X, np.asarray(y, dtype=np.intp))


def shallow_baseline(X, y, config: FineTuneConfig = FineTuneConfig(),
                     model: Optional[SoftmaxRegression] = None):
    """Train a zero-initialized softmax regression; returns ``(model, trace)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataset("shallow_baseline needs at least one labeled feature vector")
    model = model or SoftmaxRegression.zeros(X.shape[1])
    params, trace = minibatch_descent(model.params(), _softmax_loss_grad, X,
                                      np.asarray(y, dtype=np.intp), config,
                                      make_rng(config.seed, "shallow"))
    return SoftmaxRegression(params["W"], params["b"]), trace
