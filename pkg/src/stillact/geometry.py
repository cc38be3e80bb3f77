"""Head-relative geometric features for body parts and objects.

Each image is described by up to 15 entities (10 body parts, 5 objects).
Every entity is a line segment (its *central line*) in pixel coordinates.
The encoder rescales the image so the head line is 50 px long, expresses
every entity relative to the head centre and squashes the result into a
90-dimensional vector, 6 dims per entity in catalog order::

    [isExist, x1, y1, x2, y2, alpha]

Coordinates follow image conventions (x right, y down).  ``alpha`` is the
signed angle from the head direction (first endpoint to second) to the
direction from the head centre to the entity midpoint, counterclockwise
*as seen on screen* being positive.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DegenerateHead, DimensionMismatch, MissingHead

logger = logging.getLogger(__name__)

HEAD_LENGTH = 50.0
FEATURE_DIM = 6
SOURCES = ("manual", "detector")
POSE_MODES = ("full", "upper")


@dataclass(frozen=True)
class EntityKind:
    id: int
    name: str
    category: str  # "body-part" | "object"


_ENTITY_NAMES = (
    "head",
    "torso",
    "left-upper-arm",
    "left-lower-arm",
    "right-upper-arm",
    "right-lower-arm",
    "left-upper-leg",
    "left-lower-leg",
    "right-upper-leg",
    "right-lower-leg",
    "bike",
    "camera",
    "computer",
    "horse",
    "instrument",
)

ENTITIES = tuple(
    EntityKind(i, name, "body-part" if i < 10 else "object")
    for i, name in enumerate(_ENTITY_NAMES)
)
ENTITY_NAMES = _ENTITY_NAMES
ENTITY_INDEX = {e.name: e.id for e in ENTITIES}
BODY_PARTS = tuple(e.name for e in ENTITIES if e.category == "body-part")
OBJECTS = tuple(e.name for e in ENTITIES if e.category == "object")
UPPER_BODY = ("head", "torso", "left-upper-arm", "left-lower-arm",
              "right-upper-arm", "right-lower-arm")
LEG_PARTS = tuple(p for p in BODY_PARTS if p not in UPPER_BODY)
N_ENTITIES = len(ENTITIES)
VECTOR_DIM = N_ENTITIES * FEATURE_DIM

# left/right mirror table used by flip_horizontal
MIRROR = {name: name for name in ENTITY_NAMES}
for _name in BODY_PARTS:
    if _name.startswith("left-"):
        MIRROR[_name] = "right-" + _name[len("left-"):]
        MIRROR["right-" + _name[len("left-"):]] = _name


@dataclass(frozen=True)
class CentralLine:
    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def length(self) -> float:
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)

    @property
    def midpoint(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    def scaled(self, s: float) -> "CentralLine":
        return CentralLine(self.x1 * s, self.y1 * s, self.x2 * s, self.y2 * s)

    def translated(self, dx: float, dy: float) -> "CentralLine":
        return CentralLine(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)


@dataclass(frozen=True)
class DetectionRecord:
    kind: str
    line: CentralLine
    score: float = 1.0
    source: str = "detector"

    def __post_init__(self):
        if self.kind not in ENTITY_INDEX:
            raise ValueError(f"unknown entity kind {self.kind!r}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")


@dataclass(frozen=True)
class ImageAnnotation:
    image_id: str
    width: float
    height: float
    detections: tuple[DetectionRecord, ...] = ()
    label: Optional[int] = None
    pose_mode: str = "full"

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))
        if self.pose_mode not in POSE_MODES:
            raise ValueError(f"unknown pose mode {self.pose_mode!r}")

    def best_records(self) -> dict[str, DetectionRecord]:
        """Highest-score record per kind (first one wins on equal scores)."""
        best: dict[str, DetectionRecord] = {}
        for rec in self.detections:
            cur = best.get(rec.kind)
            if cur is None or rec.score > cur.score:
                best[rec.kind] = rec
        return best

    def head(self) -> DetectionRecord:
        rec = self.best_records().get("head")
        if rec is None:
            raise MissingHead(f"image {self.image_id!r} has no head record")
        return rec


@dataclass(frozen=True)
class ThresholdSet:
    """Per-entity detector-score thresholds; a detection counts as present
    only when its score is strictly larger than the threshold."""

    values: Mapping[str, float] = field(
        default_factory=lambda: {name: -math.inf for name in ENTITY_NAMES})

    def __post_init__(self):
        missing = set(ENTITY_NAMES) - set(self.values)
        extra = set(self.values) - set(ENTITY_NAMES)
        if missing or extra:
            raise DimensionMismatch(
                f"threshold set must cover exactly the 15 entities "
                f"(missing {sorted(missing)}, unknown {sorted(extra)})")
        object.__setattr__(self, "values", {k: float(self.values[k]) for k in ENTITY_NAMES})

    @classmethod
    def uniform(cls, value: float) -> "ThresholdSet":
        return cls({name: value for name in ENTITY_NAMES})

    def __getitem__(self, kind: str) -> float:
        return self.values[kind]

    def replace(self, kind: str, value: float) -> "ThresholdSet":
        vals = dict(self.values)
        vals[kind] = value
        return ThresholdSet(vals)


def _map_lines(annotation: ImageAnnotation, fn) -> ImageAnnotation:
    dets = tuple(dataclasses.replace(d, line=fn(d.line)) for d in annotation.detections)
    return dataclasses.replace(annotation, detections=dets)


def scale_annotation(annotation: ImageAnnotation, s: float) -> ImageAnnotation:
    scaled = _map_lines(annotation, lambda ln: ln.scaled(s))
    return dataclasses.replace(scaled, width=annotation.width * s, height=annotation.height * s)


def translate_annotation(annotation: ImageAnnotation, dx: float, dy: float) -> ImageAnnotation:
    return _map_lines(annotation, lambda ln: ln.translated(dx, dy))


def normalize_scale(annotation: ImageAnnotation) -> ImageAnnotation:
    """Rescale every coordinate (and the image size) so the head line is 50 px."""
    head = annotation.head().line
    length = head.length
    if length == 0.0:
        raise DegenerateHead(f"image {annotation.image_id!r} has a zero-length head line")
    s = HEAD_LENGTH / length
    if s == 1.0:
        return annotation
    return scale_annotation(annotation, s)


def _signed_angle(ux: float, uy: float, vx: float, vy: float) -> float:
    # visually counterclockwise with y pointing down
    return math.atan2(uy * vx - ux * vy, ux * vx + uy * vy)


def encode_entity(head: CentralLine, entity: Optional[CentralLine], *,
                  warn: bool = True) -> np.ndarray:
    """Raw 6-dim relation of ``entity`` to ``head`` (zeros when absent).

    When the entity midpoint sits exactly on the head centre the angle is
    undefined; it is set to 0 and a warning is logged unless ``warn`` is off
    (the head's relation to itself hits this case by construction).
    """
    if entity is None:
        return np.zeros(FEATURE_DIM)
    cx, cy = head.midpoint
    mx, my = entity.midpoint
    dx, dy = mx - cx, my - cy
    if dx == 0.0 and dy == 0.0:
        if warn:
            logger.warning("entity midpoint coincides with head centre; alpha set to 0")
        alpha = 0.0
    else:
        alpha = _signed_angle(head.x2 - head.x1, head.y2 - head.y1, dx, dy)
    return np.array([1.0, entity.x1 - cx, entity.y1 - cy, entity.x2 - cx, entity.y2 - cy, alpha])


def logistic(x):
    # tanh form never overflows and needs no branch on the sign of x
    return 0.5 + 0.5 * np.tanh(0.5 * np.asarray(x, dtype=np.float64))


def squash(raw: Sequence[float]) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape[-1] != FEATURE_DIM:
        raise DimensionMismatch(f"expected {FEATURE_DIM} raw values, got {raw.shape[-1]}")
    out = np.empty_like(raw)
    out[..., 0] = raw[..., 0]
    out[..., 1:5] = logistic(raw[..., 1:5] / HEAD_LENGTH)
    out[..., 5] = logistic(raw[..., 5] / (math.pi / 2))
    return out


def present_records(annotation: ImageAnnotation,
                    thresholds: Optional[ThresholdSet] = None) -> dict[str, DetectionRecord]:
    """Records that survive de-duplication, pose-mode masking and thresholding."""
    best = annotation.best_records()
    out = {}
    for name, rec in best.items():
        if annotation.pose_mode == "upper" and name in LEG_PARTS:
            continue
        if (rec.source == "detector" and thresholds is not None
                and not rec.score > thresholds[name]):
            continue
        out[name] = rec
    return out


def encode_image(annotation: ImageAnnotation,
                 thresholds: Optional[ThresholdSet] = None) -> np.ndarray:
    """Encode one annotation into the 90-dim feature vector.

    The annotation is normalized to head length 50 first (a no-op on
    already-normalized input).  Detector records scoring at or below their
    entity's threshold are treated as absent; manual records always count.
    The head record itself is never thresholded away.
    """
    annotation = normalize_scale(annotation)
    head = annotation.head().line
    present = present_records(annotation, thresholds)
    raw = np.zeros((N_ENTITIES, FEATURE_DIM))
    raw[0] = encode_entity(head, head, warn=False)
    for name, rec in present.items():
        if name == "head":
            continue
        raw[ENTITY_INDEX[name]] = encode_entity(head, rec.line)
    return squash(raw).reshape(VECTOR_DIM)


def encode_many(annotations: Sequence[ImageAnnotation],
                thresholds: Optional[ThresholdSet] = None) -> np.ndarray:
    if not annotations:
        return np.zeros((0, VECTOR_DIM))
    return np.stack([encode_image(a, thresholds) for a in annotations])


def flip_horizontal(annotation: ImageAnnotation) -> ImageAnnotation:
    """Mirror about the vertical image axis and swap left/right body parts."""
    w = annotation.width
    if not w > 0:
        raise ValueError(f"image {annotation.image_id!r} has non-positive width")
    dets = tuple(
        dataclasses.replace(
            d,
            kind=MIRROR[d.kind],
            line=CentralLine(w - d.line.x1, d.line.y1, w - d.line.x2, d.line.y2),
        )
        for d in annotation.detections
    )
    return dataclasses.replace(annotation, detections=dets)
