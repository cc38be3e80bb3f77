"""Average precision, mAP, and cross-validated detection thresholds.

AP here is the mean, over the positives, of the precision at each
positive's rank (no interpolation), summed in exact rational arithmetic
and rounded once to float.  Ranking is by descending score with a
stable sort, so tied items keep their input order; the number of ties is
reported alongside every AP.
"""

from __future__ import annotations

import json
import logging
import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (DataError, InsufficientData, LengthMismatch, MissingClass,
                     NoPositives)
from .geometry import ENTITY_NAMES, ImageAnnotation, ThresholdSet, encode_image
from .seeding import rng as make_rng

logger = logging.getLogger(__name__)

CLASS_NAMES = (
    "interacting-with-computer",
    "photographing",
    "playing-instrument",
    "riding-bike",
    "riding-horse",
    "running",
    "walking",
)
N_CLASSES = len(CLASS_NAMES)


@dataclass(frozen=True)
class ApResult:
    class_id: int
    ap: float
    positives: int
    ranked: int
    ties: int = 0


def rank_order(scores) -> np.ndarray:
    """Indices by descending score; ties keep input order."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def count_ties(scores) -> int:
    """Number of items whose score equals the score ranked just above them."""
    s = np.sort(np.asarray(scores, dtype=np.float64))
    return int(np.count_nonzero(s[1:] == s[:-1]))


def average_precision(scores: Sequence[float], is_positive: Sequence[bool]) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(is_positive, dtype=bool)
    if scores.shape != pos.shape:
        raise LengthMismatch(f"{scores.shape[0]} scores vs {pos.shape[0]} labels")
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise NoPositives("average precision needs at least one positive")
    hits = pos[rank_order(scores)]
    ranks = np.flatnonzero(hits) + 1
    # exact rational sum, rounded once
    total = sum(Fraction(k, int(r)) for k, r in enumerate(ranks, start=1))
    return float(total / n_pos)


def average_precision_result(scores, is_positive, class_id: int) -> ApResult:
    pos = np.asarray(is_positive, dtype=bool)
    return ApResult(class_id, average_precision(scores, pos), int(pos.sum()),
                    int(pos.shape[0]), count_ties(scores))


def mean_average_precision(results: Sequence[ApResult]) -> float:
    ids = sorted(r.class_id for r in results)
    if ids != list(range(N_CLASSES)):
        missing = sorted(set(range(N_CLASSES)) - set(ids))
        raise MissingClass(f"need exactly one AP per class; missing {missing}, got {ids}")
    return math.fsum(r.ap for r in results) / N_CLASSES


@dataclass
class EvaluationReport:
    results: list[ApResult]
    map: float
    accuracy: float
    n_images: int
    skipped: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "classes": [
                {"class": CLASS_NAMES[r.class_id], "class_id": r.class_id, "ap": r.ap,
                 "support": r.positives, "ranked": r.ranked, "ties": r.ties}
                for r in self.results
            ],
            "mAP": self.map,
            "accuracy": self.accuracy,
            "n_images": self.n_images,
            "skipped": list(self.skipped),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"{'class':<28}{'AP':>8}{'support':>9}{'ties':>6}"]
        for r in self.results:
            lines.append(f"{CLASS_NAMES[r.class_id]:<28}{100 * r.ap:>8.2f}{r.positives:>9}{r.ties:>6}")
        lines.append(f"{'mAP':<28}{100 * self.map:>8.2f}")
        lines.append(f"accuracy {100 * self.accuracy:.2f}  images {self.n_images}  skipped {len(self.skipped)}")
        return "\n".join(lines) + "\n"


def evaluate_scores(probs: np.ndarray, labels: Sequence[int],
                    skipped: Sequence[str] = ()) -> EvaluationReport:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    results = [average_precision_result(probs[:, c], labels == c, c) for c in range(N_CLASSES)]
    accuracy = float(np.mean(np.argmax(probs, axis=1) == labels))
    return EvaluationReport(results, mean_average_precision(results), accuracy,
                            int(labels.shape[0]), list(skipped))


def encode_labeled(annotations: Sequence[ImageAnnotation],
                   thresholds: Optional[ThresholdSet] = None):
    """Encode labeled annotations, collecting ids of images that fail to encode."""
    feats, labels, skipped = [], [], []
    for a in annotations:
        if a.label is None:
            raise DataError(f"image {a.image_id!r} has no label")
        try:
            feats.append(encode_image(a, thresholds))
        except DataError as exc:
            logger.warning("skipping image %s: %s", a.image_id, exc)
            skipped.append(a.image_id)
            continue
        labels.append(a.label)
    X = np.stack(feats) if feats else np.zeros((0, len(ENTITY_NAMES) * 6))
    return X, np.asarray(labels, dtype=np.intp), skipped


def evaluate_model(model, annotations: Sequence[ImageAnnotation],
                   thresholds: Optional[ThresholdSet] = None) -> EvaluationReport:
    """Rank every test image per class by the model's class probability.

    ``model`` is anything with ``forward(X) -> (n, 7) probabilities``.
    Images that cannot be encoded are skipped and listed in the report.
    """
    X, y, skipped = encode_labeled(annotations, thresholds)
    return evaluate_scores(model.forward(X), y, skipped)


# --- threshold selection ----------------------------------------------------

Trainer = Callable[[np.ndarray, np.ndarray], object]


def stratified_folds(labels: Sequence[int], folds: int, seed: int) -> np.ndarray:
    """Fold id per item; each class is shuffled then dealt round-robin."""
    labels = np.asarray(labels)
    rng = make_rng(seed, "folds")
    out = np.empty(labels.shape[0], dtype=np.intp)
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.shape[0])]
        out[idx] = (np.arange(idx.shape[0]) + offset) % folds
        offset += idx.shape[0]
    return out


def threshold_grid(scores: Sequence[float]) -> list[float]:
    """Candidate thresholds for one entity.

    One candidate per decile (levels 0, 0.1, ..., 0.9) of the observed
    detector scores, each nudged to the next float below the decile so that
    ``score > threshold`` keeps every detection at or above it.  The lowest
    candidate therefore keeps all detections.
    """
    q = np.quantile(np.asarray(scores, dtype=np.float64), np.arange(10) / 10.0)
    return sorted(set(np.nextafter(q, -np.inf).tolist()))


@dataclass
class ThresholdSelection:
    thresholds: ThresholdSet
    cv_map: float
    flagged: list[str]

    def to_dict(self) -> dict:
        return {"thresholds": dict(self.thresholds.values), "cv_mAP": self.cv_map,
                "flagged": list(self.flagged)}


def cross_validated_map(annotations: Sequence[ImageAnnotation], fold_ids: np.ndarray,
                        folds: int, thresholds: ThresholdSet, trainer: Trainer) -> float:
    X, y, skipped = encode_labeled(annotations, thresholds)
    if skipped:
        keep = [i for i, a in enumerate(annotations) if a.image_id not in set(skipped)]
        fold_ids = fold_ids[keep]
    maps = []
    for f in range(folds):
        test = fold_ids == f
        model = trainer(X[~test], y[~test])
        maps.append(evaluate_scores(model.forward(X[test]), y[test]).map)
    return math.fsum(maps) / folds


def select_thresholds(annotations: Sequence[ImageAnnotation], trainer: Trainer,
                      folds: int = 5, seed: int = 0) -> ThresholdSelection:
    """Greedy per-entity threshold search maximizing cross-validated mAP.

    ``trainer(X, y)`` fits a fresh classifier and returns an object with
    ``forward``.  Entities are visited once in catalog order; every
    threshold starts at its lowest grid point and ties between candidates
    keep the lower one.  Entities never detected get a 0 sentinel and are
    listed in ``flagged``.
    """
    if folds < 2:
        raise InsufficientData(f"need at least 2 folds, got {folds}")
    labels = [a.label for a in annotations]
    if any(lbl is None for lbl in labels):
        raise DataError("threshold selection needs labeled annotations")
    fold_ids = stratified_folds(labels, folds, seed)
    for f in range(folds):
        present = {labels[i] for i in np.flatnonzero(fold_ids == f)}
        if present != set(range(N_CLASSES)):
            raise InsufficientData(
                f"fold {f} lacks classes {sorted(set(range(N_CLASSES)) - present)}")

    grids, flagged = {}, []
    for name in ENTITY_NAMES:
        scores = [d.score for a in annotations for d in a.detections
                  if d.kind == name and d.source == "detector"]
        if scores:
            grids[name] = threshold_grid(scores)
        else:
            grids[name] = [0.0]
            flagged.append(name)

    current = ThresholdSet({name: grids[name][0] for name in ENTITY_NAMES})
    best = cross_validated_map(annotations, fold_ids, folds, current, trainer)
    for name in ENTITY_NAMES:
        for cand in grids[name][1:]:
            trial = current.replace(name, cand)
            score = cross_validated_map(annotations, fold_ids, folds, trial, trainer)
            logger.info("threshold %s=%.6g cv mAP %.4f", name, cand, score)
            if score > best:
                best, current = score, trial
    return ThresholdSelection(current, best, flagged)


__all__ = [
    "ApResult", "CLASS_NAMES", "EvaluationReport", "ThresholdSelection",
    "average_precision", "evaluate_model",
    "evaluate_scores", "mean_average_precision", "select_thresholds",
    "stratified_folds", "threshold_grid",
]
