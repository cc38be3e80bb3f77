import dataclasses
import math

import numpy as np
import pytest

from stillact import dbn
from stillact.dbn import (DbnModel, FineTuneConfig, assemble, finetune, forward,
                          loss_and_gradients, predict, pretrain)
from stillact.errors import (DimensionMismatch, EmptyBatch, EmptyDataset, LabelOutOfRange,
                             NumericError)
from stillact.rbm import CdConfig

from helpers import random_model
from oracles import central_differences, max_relative_error


def uniform_model(layers=dbn.DEFAULT_LAYERS):
    rng = np.random.default_rng(0)
    m = random_model(rng, layers)
    return dataclasses.replace(m, W3=np.zeros_like(m.W3), b3=np.zeros_like(m.b3))


def separable_set(rng, n_per_class=30, dim=10, noise=0.05):
    centers = rng.random((7, dim))
    y = np.repeat(np.arange(7), n_per_class)
    X = np.clip(centers[y] + rng.normal(0, noise, (y.size, dim)), 0, 1)
    return X, y


def test_default_architecture():
    assert dbn.DEFAULT_LAYERS == (90, 200, 50, 7)
    g, r, _ = pretrain(np.random.default_rng(0).random((5, 90)), CdConfig(epochs=0))
    assert assemble(g, r).layers == (90, 200, 50, 7)


def test_uniform_forward_and_predict():
    m = uniform_model()
    x = np.random.default_rng(1).random(90)
    np.testing.assert_allclose(forward(m, x), np.full(7, 1 / 7), rtol=0, atol=1e-15)
    label, _ = predict(m, x)
    assert label == 0


def test_forward_is_distribution():
    rng = np.random.default_rng(2)
    m = random_model(rng, (90, 200, 50, 7), scale=1.0)
    X = rng.normal(0, 3, (1000, 90))
    P = forward(m, X)
    assert np.all(P > 0)
    assert np.max(np.abs(P.sum(axis=1) - 1)) <= 1e-12


def test_softmax_row_permutation():
    rng = np.random.default_rng(3)
    m = random_model(rng)
    perm = np.array([3, 0, 6, 1, 5, 2, 4])
    mp = dataclasses.replace(m, W3=m.W3[:, perm], b3=m.b3[perm])
    X = rng.random((20, 10))
    np.testing.assert_allclose(forward(mp, X), forward(m, X)[:, perm], rtol=0, atol=1e-15)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(4)
    m = random_model(rng)
    shifted = dataclasses.replace(m, b3=m.b3 + 12.5)
    X = rng.random((50, 10))
    np.testing.assert_allclose(forward(shifted, X), forward(m, X), rtol=0, atol=1e-12)
    assert np.array_equal(predict(shifted, X)[0], predict(m, X)[0])


def test_uniform_loss_is_log7():
    m = uniform_model()
    X = np.random.default_rng(5).random((9, 90))
    loss, grads = loss_and_gradients(m, X, np.arange(9) % 7)
    assert math.isclose(loss, math.log(7), rel_tol=1e-14)
    assert math.isclose(loss, 1.945910, abs_tol=1e-6)
    for name, p in m.params().items():
        assert grads[name].shape == p.shape


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(6)
    m = random_model(rng, sigma=1.3)
    X = rng.random((8, 10))
    y = rng.integers(0, 7, 8)
    _, grads = loss_and_gradients(m, X, y)
    params = {k: v.copy() for k, v in m.params().items()}
    fd = central_differences(lambda p: loss_and_gradients(m.with_params(p), X, y)[0], params)
    for name in params:
        assert max_relative_error(grads[name], fd[name]) <= 1e-4, name


def test_duplicated_batch_gives_same_loss_and_gradients():
    rng = np.random.default_rng(7)
    m = random_model(rng)
    X = rng.random((6, 10))
    y = rng.integers(0, 7, 6)
    l1, g1 = loss_and_gradients(m, X, y)
    l2, g2 = loss_and_gradients(m, np.vstack([X, X]), np.concatenate([y, y]))
    assert math.isclose(l1, l2, rel_tol=1e-14)
    for k in g1:
        np.testing.assert_allclose(g1[k], g2[k], rtol=1e-12, atol=1e-15)


def test_loss_errors():
    m = random_model(np.random.default_rng(8))
    with pytest.raises(EmptyBatch):
        loss_and_gradients(m, np.zeros((0, 10)), np.zeros(0, dtype=int))
    with pytest.raises(LabelOutOfRange):
        loss_and_gradients(m, np.zeros((2, 10)), [0, 7])
    with pytest.raises(DimensionMismatch):
        forward(m, np.zeros(11))


def test_pretrain_zero_epochs_returns_init():
    X = np.random.default_rng(9).random((12, 90))
    g, r, (t1, t2) = pretrain(X, CdConfig(epochs=0, seed=4))
    g2, r2, _ = pretrain(X, CdConfig(epochs=0, seed=4))
    assert np.array_equal(g.W, g2.W) and np.array_equal(r.W, r2.W)
    assert t1 == [] and t2 == []
    assert np.all(g.b == 0) and np.all(g.c == 0) and np.all(r.b == 0)
    assert 0 < np.std(g.W) < 0.02


def test_pretrain_layer2_inputs_in_unit_interval(monkeypatch):
    seen = []
    real = dbn.pretrain_layer

    def spy(rbm, data, config, rng=None):
        seen.append(np.asarray(data))
        return real(rbm, data, config, rng)

    monkeypatch.setattr(dbn, "pretrain_layer", spy)
    X = np.random.default_rng(10).random((30, 90))
    pretrain(X, CdConfig(epochs=2))
    assert np.all((seen[1] > 0) & (seen[1] < 1))
    seen.clear()
    pretrain(X, CdConfig(epochs=2), propagate="sample")
    assert set(np.unique(seen[1])) <= {0.0, 1.0}


def test_pretrain_errors():
    with pytest.raises(EmptyDataset):
        pretrain(np.zeros((0, 90)))


def test_finetune_zero_lr_keeps_parameters():
    rng = np.random.default_rng(11)
    X, y = separable_set(rng)
    g, r, _ = pretrain(X, CdConfig(epochs=2), hidden=(16, 8))
    m0 = assemble(g, r)
    m1, trace = finetune(m0, X, y, FineTuneConfig(learning_rate=0.0, epochs=3))
    for k, p in m0.params().items():
        assert np.array_equal(m1.params()[k], p)
    assert np.all(m1.W3 == 0) and np.all(m1.b3 == 0)
    assert len(trace) == 3


def test_finetune_errors():
    m = uniform_model((10, 16, 8, 7))
    with pytest.raises(EmptyDataset):
        finetune(m, np.zeros((0, 10)), np.zeros(0, dtype=int))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_finetune_nonfinite_loss_raises():
    m = uniform_model((10, 16, 8, 7))
    X = np.random.default_rng(0).random((10, 10))
    with pytest.raises(NumericError):
        finetune(m, X, np.arange(10) % 7, FineTuneConfig(learning_rate=1e308, epochs=5))


def test_default_recipe_values():
    cfg = FineTuneConfig()
    assert cfg.learning_rate == 0.1 and cfg.epochs == 1000 and cfg.batch_size == 20


def _train_small(seed=0):
    rng = np.random.default_rng(12)
    X, y = separable_set(rng, n_per_class=100)
    return dbn.train(X, y, CdConfig(learning_rate=0.1, epochs=30, seed=seed),
                     FineTuneConfig(learning_rate=0.1, epochs=300, seed=seed), hidden=(16, 8))


def test_training_is_deterministic():
    a, ta = _train_small(3)
    b, tb = _train_small(3)
    assert ta == tb
    for k, p in a.params().items():
        assert np.array_equal(p, b.params()[k])
    assert np.array_equal(a.layer1.c, b.layer1.c)


def test_smoothed_loss_is_non_increasing_and_learns():
    model, traces = _train_small()
    t = np.asarray(traces["finetune"])
    smooth = np.convolve(t, np.ones(50) / 50, mode="valid")
    assert np.all(np.diff(smooth) <= 1e-12)
    rng = np.random.default_rng(12)
    X, y = separable_set(rng, n_per_class=100)
    assert np.mean(predict(model, X)[0] == y) >= 0.95
