import numpy as np
import pytest

from stillact.augment import AugmentConfig, augment, augment_all
from stillact.errors import InvalidConfig, MissingLabel
from stillact.geometry import flip_horizontal, normalize_scale

from helpers import random_annotation


def _labeled(seed=0):
    return normalize_scale(random_annotation(np.random.default_rng(seed)))


def _coords(a):
    return np.array([[d.line.x1, d.line.y1, d.line.x2, d.line.y2] for d in a.detections])


def test_twenty_outputs_per_image():
    out = augment(_labeled(), AugmentConfig(replicas=10))
    assert len(out) == 20
    assert len({o.image_id for o in out}) == 20


def test_zero_jitter_gives_exact_copies():
    a = _labeled(1)
    out = augment(a, AugmentConfig(jitter_px=0, replicas=3))
    f = flip_horizontal(a)
    for o in out[:3]:
        assert o.detections == a.detections
    for o in out[3:]:
        assert o.detections == f.detections


def test_jitter_bound_and_integrality():
    a = _labeled(2)
    out = augment(a, AugmentConfig(jitter_px=10, replicas=10, seed=5))
    src = _coords(a)
    src_flip = _coords(flip_horizontal(a))
    for o in out[:10]:
        d = _coords(o) - src
        assert np.max(np.abs(d)) <= 10
        assert np.array_equal(d, np.round(d))
    for o in out[10:]:
        assert np.max(np.abs(_coords(o) - src_flip)) <= 10


def test_labels_and_mode_preserved():
    a = _labeled(3)
    for o in augment(a):
        assert o.label == a.label and o.pose_mode == a.pose_mode


def test_deterministic_and_seed_sensitive():
    a = _labeled(4)
    assert augment(a, AugmentConfig(seed=1)) == augment(a, AugmentConfig(seed=1))
    assert augment(a, AugmentConfig(seed=1)) != augment(a, AugmentConfig(seed=2))


def test_per_image_streams_are_independent_of_batch():
    a, b = _labeled(5), _labeled(6)
    b = b.__class__(b.image_id + "x", b.width, b.height, b.detections, b.label, b.pose_mode)
    both = augment_all([a, b])
    assert both[:20] == augment(a)


def test_errors():
    a = _labeled(7)
    with pytest.raises(MissingLabel):
        augment(a.__class__(a.image_id, a.width, a.height, a.detections, None))
    with pytest.raises(InvalidConfig):
        AugmentConfig(jitter_px=-1)
    with pytest.raises(InvalidConfig):
        AugmentConfig(replicas=0)
