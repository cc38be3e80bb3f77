import math

import numpy as np

from stillact.dbn import DbnModel
from stillact.geometry import (ENTITY_NAMES, LEG_PARTS, CentralLine, DetectionRecord,
                               ImageAnnotation)
from stillact.rbm import BinaryRbm, GaussianRbm


def q(x):
    """Round onto a 1/256 px grid so mirroring about an integer width is exact."""
    return round(x * 256) / 256


def random_annotation(rng, index=0, *, p_present=0.7, width=None):
    """A random annotation with a head and a random subset of other entities."""
    width = float(width or rng.integers(200, 1200))
    height = float(rng.integers(200, 1200))
    cx, cy = rng.uniform(0, width), rng.uniform(0, height)
    length = rng.uniform(10, 200)
    theta = rng.uniform(-math.pi, math.pi)
    hx, hy = 0.5 * length * math.cos(theta), 0.5 * length * math.sin(theta)
    dets = [DetectionRecord("head", CentralLine(q(cx - hx), q(cy - hy), q(cx + hx), q(cy + hy)),
                            float(rng.uniform(0, 1)), "detector")]
    upper = bool(rng.random() < 0.2)
    for name in ENTITY_NAMES[1:]:
        if rng.random() >= p_present:
            continue
        x1, x2 = rng.uniform(-300, 300, 2) + cx
        y1, y2 = rng.uniform(-300, 300, 2) + cy
        dets.append(DetectionRecord(name, CentralLine(q(x1), q(y1), q(x2), q(y2)),
                                    float(rng.uniform(-1, 1)),
                                    "manual" if rng.random() < 0.3 else "detector"))
    label = int(rng.integers(0, 7))
    return ImageAnnotation(f"rand-{index}", width, height, tuple(dets), label,
                           "upper" if upper else "full")




def random_model(rng, layers=(10, 16, 8, 7), scale=0.5, sigma=1.0):
    v, h1, h2, k = layers
    g = GaussianRbm(rng.normal(0, scale, (v, h1)), rng.normal(0, scale, h1),
                    rng.normal(0, scale, v), sigma)
    r = BinaryRbm(rng.normal(0, scale, (h1, h2)), rng.normal(0, scale, h2),
                  rng.normal(0, scale, h1))
    return DbnModel(g, r, rng.normal(0, scale, (h2, k)), rng.normal(0, scale, k))


__all__ = ["random_annotation", "random_model", "q", "LEG_PARTS"]
