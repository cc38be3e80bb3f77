"""Training-set expansion by horizontal flip and integer coordinate jitter."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidConfig, MissingLabel
from .geometry import CentralLine, ImageAnnotation, flip_horizontal
from .seeding import rng as make_rng


@dataclass(frozen=True)
class AugmentConfig:
    jitter_px: int = 10
    replicas: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.jitter_px < 0:
            raise InvalidConfig(f"jitter_px must be >= 0, got {self.jitter_px}")
        if self.replicas < 1:
            raise InvalidConfig(f"replicas must be >= 1, got {self.replicas}")


def jitter(annotation: ImageAnnotation, bound: int, rng: np.random.Generator) -> ImageAnnotation:
    """Add an independent integer offset in [-bound, bound] to every endpoint coordinate."""
    if bound == 0:
        return annotation
    offsets = rng.integers(-bound, bound + 1, size=(len(annotation.detections), 4))
    dets = []
    for d, (a, b, c, e) in zip(annotation.detections, offsets.tolist()):
        ln = d.line
        dets.append(dataclasses.replace(
            d, line=CentralLine(ln.x1 + a, ln.y1 + b, ln.x2 + c, ln.y2 + e)))
    return dataclasses.replace(annotation, detections=tuple(dets))


def augment(annotation: ImageAnnotation, config: AugmentConfig = AugmentConfig()) -> list[ImageAnnotation]:
    """``2 * replicas`` jittered copies: originals first, then flipped ones.

    The input is expected to be head-normalized already, so the jitter bound
    is in units where the head is 50 px long.  Each copy draws from its own
    stream keyed by (seed, image_id, orientation, replica), so the output
    for one image does not depend on which other images are augmented.
    The copies are not re-normalized after jitter.
    """
    if annotation.label is None:
        raise MissingLabel(f"image {annotation.image_id!r} has no label")
    out = []
    for orientation, source in enumerate((annotation, flip_horizontal(annotation))):
        tag = "orig" if orientation == 0 else "flip"
        for r in range(config.replicas):
            rng = make_rng(config.seed, annotation.image_id, orientation, r)
            copy = jitter(source, config.jitter_px, rng)
            out.append(dataclasses.replace(copy, image_id=f"{annotation.image_id}/{tag}/{r}"))
    return out


def augment_all(annotations: Iterable[ImageAnnotation],
                config: AugmentConfig = AugmentConfig()) -> list[ImageAnnotation]:
    out = []
    for a in annotations:
        out.extend(augment(a, config))
    return out
