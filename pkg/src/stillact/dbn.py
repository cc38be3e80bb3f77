"""The 90-200-50-7 deep belief net.

Layer 1 is a Gaussian-visible RBM, layer 2 a binary RBM, and a softmax
head sits on top.  Training is greedy layer-wise CD pre-training followed by
mini-batch gradient descent on the cross-entropy of the whole stack (the
visible biases of both RBMs take no part in the forward pass and are kept
from pre-training).
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (DimensionMismatch, EmptyBatch, EmptyDataset, InvalidConfig,
                     LabelOutOfRange, NumericError)
from .geometry import VECTOR_DIM, logistic
from .rbm import BinaryRbm, CdConfig, GaussianRbm, hidden_given_visible, pretrain_layer
from .seeding import derive_seed, rng as make_rng

logger = logging.getLogger(__name__)

N_CLASSES = 7
DEFAULT_LAYERS = (VECTOR_DIM, 200, 50, N_CLASSES)
FORMAT_VERSION = 1
PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")


@dataclass(frozen=True)
class FineTuneConfig:
    learning_rate: float = 0.1
    epochs: int = 1000
    batch_size: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise InvalidConfig(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.batch_size < 1:
            raise InvalidConfig(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise InvalidConfig(f"epochs must be >= 0, got {self.epochs}")


@dataclass(frozen=True, eq=False)
class DbnModel:
    layer1: GaussianRbm
    layer2: BinaryRbm
    W3: np.ndarray
    b3: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.layer1.n_hidden != self.layer2.n_visible:
            raise DimensionMismatch(
                f"layer1 has {self.layer1.n_hidden} hidden units, layer2 expects {self.layer2.n_visible}")
        if self.W3.shape != (self.layer2.n_hidden, self.b3.shape[0]):
            raise DimensionMismatch(f"softmax head shape {self.W3.shape} does not fit layer2")

    @property
    def layers(self) -> tuple[int, int, int, int]:
        return (self.layer1.n_visible, self.layer1.n_hidden, self.layer2.n_hidden, self.b3.shape[0])

    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.layer1.W, "b1": self.layer1.b, "W2": self.layer2.W,
                "b2": self.layer2.b, "W3": self.W3, "b3": self.b3}

    def with_params(self, params: dict[str, np.ndarray]) -> "DbnModel":
        return dataclasses.replace(
            self,
            layer1=dataclasses.replace(self.layer1, W=params["W1"], b=params["b1"]),
            layer2=dataclasses.replace(self.layer2, W=params["W2"], b=params["b2"]),
            W3=params["W3"], b3=params["b3"])

    def forward(self, X) -> np.ndarray:
        return forward(self, X)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _check_features(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.layers[0]:
        raise DimensionMismatch(f"feature has {X.shape[-1]} dims, model expects {model.layers[0]}")
    return X


def _hidden(model: DbnModel, X):
    h1 = logistic(model.layer1.b + (X / model.layer1.sigma) @ model.layer1.W)
    h2 = logistic(model.layer2.b + h1 @ model.layer2.W)
    return h1, h2


def forward(model: DbnModel, X) -> np.ndarray:
    """Class probabilities for one feature vector or a batch of rows."""
    X = _check_features(model, X)
    _, h2 = _hidden(model, X)
    return softmax(h2 @ model.W3 + model.b3)


def predict(model, X):
    """``(label, probabilities)``; ties go to the lowest class index."""
    p = model.forward(X)
    return np.argmax(p, axis=-1), p


def _check_labels(y, n, n_classes):
    y = np.asarray(y)
    if y.shape != (n,):
        raise DimensionMismatch(f"{y.shape[0] if y.ndim else 0} labels for {n} rows")
    if n and (y.min() < 0 or y.max() >= n_classes):
        raise LabelOutOfRange(f"labels must lie in 0..{n_classes - 1}")
    return y.astype(np.intp)


def loss_and_gradients(model: DbnModel, X, y):
    """Mean cross-entropy of ``y`` under ``forward`` and its gradients.

    Gradients are returned as a dict keyed like :meth:`DbnModel.params`.
    """
    X = _check_features(model, X)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyBatch("loss_and_gradients needs a non-empty batch")
    y = _check_labels(y, X.shape[0], model.layers[3])
    return _loss_grad(model.params(), model.layer1.sigma, X, y)


def _loss_grad(params, sigma, X, y):
    n = X.shape[0]
    Xs = X / sigma
    h1 = logistic(params["b1"] + Xs @ params["W1"])
    h2 = logistic(params["b2"] + h1 @ params["W2"])
    z = h2 @ params["W3"] + params["b3"]
    logp = log_softmax(z)
    rows = np.arange(n)
    loss = float(-logp[rows, y].mean())

    dz = np.exp(logp)
    dz[rows, y] -= 1.0
    dz /= n
    da2 = (dz @ params["W3"].T) * h2 * (1.0 - h2)
    da1 = (da2 @ params["W2"].T) * h1 * (1.0 - h1)
    grads = {
        "W3": h2.T @ dz, "b3": dz.sum(axis=0),
        "W2": h1.T @ da2, "b2": da2.sum(axis=0),
        "W1": Xs.T @ da1, "b1": da1.sum(axis=0),
    }
    return loss, grads


def minibatch_descent(params: dict[str, np.ndarray],
                      loss_grad: Callable[[dict, np.ndarray, np.ndarray], tuple],
                      X: np.ndarray, y: np.ndarray, config: FineTuneConfig,
                      rng: np.random.Generator, log: Optional[Callable[[int, float], None]] = None):
    """Plain shuffled mini-batch gradient descent shared by every classifier.

    ``loss_grad(params, Xb, yb)`` returns ``(loss, grads)``.  The per-epoch
    trace holds the mean of the mini-batch losses.  Raises NumericError as
    soon as a loss is not finite.
    """
    params = {k: v.copy() for k, v in params.items()}
    n = X.shape[0]
    lr = config.learning_rate
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_grad(params, X[idx], y[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            for k, g in grads.items():
                params[k] -= lr * g
            total += loss
            batches += 1
        trace.append(total / batches)
        if log is not None:
            log(epoch, trace[-1])
    return params, trace


def pretrain(features, config: CdConfig = CdConfig(), *, hidden=(200, 50),
             propagate: str = "mean", sigma: float = 1.0):
    """Greedy layer-wise pre-training; returns ``(grbm, rbm, traces)``.

    Layer-2 training data are layer-1 hidden probabilities
    (``propagate="mean"``) or a single Bernoulli sample of them
    (``propagate="sample"``).
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataset("pretrain needs at least one feature vector")
    if propagate not in ("mean", "sample"):
        raise InvalidConfig(f"propagate must be 'mean' or 'sample', got {propagate!r}")
    n_vis = X.shape[1]
    grbm = GaussianRbm.init(n_vis, hidden[0], make_rng(config.seed, "init", "layer1"), sigma=sigma)
    rbm2 = BinaryRbm.init(hidden[0], hidden[1], make_rng(config.seed, "init", "layer2"))

    grbm, trace1 = pretrain_layer(grbm, X, config, make_rng(config.seed, "pretrain", "layer1"))
    H = hidden_given_visible(grbm, X)
    if propagate == "sample":
        prop_rng = make_rng(config.seed, "propagate")
        H = (prop_rng.random(H.shape) < H).astype(np.float64)
    rbm2, trace2 = pretrain_layer(rbm2, H, config, make_rng(config.seed, "pretrain", "layer2"))
    return grbm, rbm2, (trace1, trace2)


def assemble(grbm: GaussianRbm, rbm2: BinaryRbm, n_classes: int = N_CLASSES,
             metadata: Optional[dict] = None) -> DbnModel:
    """Stack pre-trained layers under a zero-initialized softmax head."""
    return DbnModel(grbm, rbm2, np.zeros((rbm2.n_hidden, n_classes)), np.zeros(n_classes),
                    dict(metadata or {}))


def _dbn_loss_grad(template: DbnModel):
    sigma = template.layer1.sigma

    def fn(params, Xb, yb):
        return _loss_grad(params, sigma, Xb, yb)
    return fn


def finetune(model: DbnModel, features, labels, config: FineTuneConfig = FineTuneConfig(),
             log: Optional[Callable[[int, float], None]] = None):
    """Fine-tune every forward parameter; returns ``(model, loss_trace)``."""
    X = _check_features(model, features)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataset("finetune needs at least one labeled feature vector")
    y = _check_labels(labels, X.shape[0], model.layers[3])
    params, trace = minibatch_descent(model.params(), _dbn_loss_grad(model), X, y, config,
                                      make_rng(config.seed, "finetune"), log)
    meta = dict(model.metadata)
    meta["finetune"] = dataclasses.asdict(config)
    return dataclasses.replace(model.with_params(params), metadata=meta), trace


def train(features, labels, cd_config: CdConfig = CdConfig(),
          ft_config: FineTuneConfig = FineTuneConfig(), *, hidden=(200, 50),
          propagate: str = "mean", log: Optional[Callable[[int, float], None]] = None):
    """Pre-train then fine-tune; returns ``(model, traces)``."""
    grbm, rbm2, (t1, t2) = pretrain(features, cd_config, hidden=hidden, propagate=propagate)
    meta = {"format_version": FORMAT_VERSION, "pretrain": dataclasses.asdict(cd_config),
            "propagate": propagate}
    model = assemble(grbm, rbm2, metadata=meta)
    model, t3 = finetune(model, features, labels, ft_config, log)
    return model, {"pretrain_layer1": t1, "pretrain_layer2": t2, "finetune": t3}


def split_seeds(seed: int) -> dict[str, int]:
    """Per-stage seeds derived from one run seed."""
    return {name: derive_seed(seed, name) for name in ("pretrain", "finetune", "augment", "folds")}
