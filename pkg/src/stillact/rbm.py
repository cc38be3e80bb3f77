"""Binary and Gaussian-visible restricted Boltzmann machines.

Energies (visible ``v``, hidden ``h``, weights ``W`` of shape visible x hidden)::

    binary:    E(v, h) = -v.W.h - b.h - c.v
    gaussian:  E(v, h) = |v - c|^2 / (2 sigma^2) - (v / sigma).W.h - b.h

Training is CD-k with plain mini-batch gradient steps: no momentum, no
weight decay.  All arithmetic is float64.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import DimensionMismatch, EmptyBatch, EmptyDataset, InvalidConfig
from .geometry import logistic
from .seeding import rng as make_rng


@dataclass(frozen=True)
class CdConfig:
    learning_rate: float = 0.01
    epochs: int = 100
    batch_size: int = 20
    k: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise InvalidConfig(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.k < 1:
            raise InvalidConfig(f"k must be >= 1, got {self.k}")
        if self.batch_size < 1:
            raise InvalidConfig(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise InvalidConfig(f"epochs must be >= 0, got {self.epochs}")


@dataclass(frozen=True, eq=False)
class BinaryRbm:
    W: np.ndarray
    b: np.ndarray  # hidden bias
    c: np.ndarray  # visible bias

    def __post_init__(self):
        _check_params(self.W, self.b, self.c)

    @property
    def n_visible(self) -> int:
        return self.W.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W.shape[1]

    @classmethod
    def init(cls, n_visible, n_hidden, rng, scale=0.01):
        return cls(rng.normal(0.0, scale, size=(n_visible, n_hidden)),
                   np.zeros(n_hidden), np.zeros(n_visible))


@dataclass(frozen=True, eq=False)
class GaussianRbm:
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        _check_params(self.W, self.b, self.c)
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def n_visible(self) -> int:
        return self.W.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W.shape[1]

    @classmethod
    def init(cls, n_visible, n_hidden, rng, scale=0.01, sigma=1.0):
        return cls(rng.normal(0.0, scale, size=(n_visible, n_hidden)),
                   np.zeros(n_hidden), np.zeros(n_visible), sigma)


Rbm = Union[BinaryRbm, GaussianRbm]


def _check_params(W, b, c):
    if W.ndim != 2 or b.shape != (W.shape[1],) or c.shape != (W.shape[0],):
        raise DimensionMismatch(
            f"inconsistent RBM shapes W{W.shape} b{b.shape} c{c.shape}")


def _as_rows(x, width, what):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != width:
        raise DimensionMismatch(f"{what} has {x.shape[-1]} units, model expects {width}")
    return x


def energy_binary(rbm: BinaryRbm, v, h) -> float:
    v = _as_rows(v, rbm.n_visible, "v")
    h = _as_rows(h, rbm.n_hidden, "h")
    return float(-(v @ rbm.W @ h) - rbm.b @ h - rbm.c @ v)


def energy_gaussian(rbm: GaussianRbm, v, h) -> float:
    v = _as_rows(v, rbm.n_visible, "v")
    h = _as_rows(h, rbm.n_hidden, "h")
    s = rbm.sigma
    return float(np.sum((v - rbm.c) ** 2) / (2.0 * s * s) - (v @ rbm.W @ h) / s - rbm.b @ h)


def energy(rbm: Rbm, v, h) -> float:
    if isinstance(rbm, GaussianRbm):
        return energy_gaussian(rbm, v, h)
    return energy_binary(rbm, v, h)


def _visible_input(rbm: Rbm, v):
    return v / rbm.sigma if isinstance(rbm, GaussianRbm) else v


def hidden_given_visible(rbm: Rbm, v) -> np.ndarray:
    """P(h_j = 1 | v) for a single vector or a batch of rows."""
    v = _as_rows(v, rbm.n_visible, "v")
    return logistic(rbm.b + _visible_input(rbm, v) @ rbm.W)


def visible_given_hidden(rbm: Rbm, h) -> np.ndarray:
    """P(v_i = 1 | h) for a binary RBM, E[v_i | h] for a Gaussian one."""
    h = _as_rows(h, rbm.n_hidden, "h")
    if isinstance(rbm, GaussianRbm):
        return rbm.c + rbm.sigma * (h @ rbm.W.T)
    return logistic(rbm.c + h @ rbm.W.T)


def free_energy_binary(rbm: BinaryRbm, v) -> float:
    v = _as_rows(v, rbm.n_visible, "v")
    return float(-rbm.c @ v - np.sum(np.logaddexp(0.0, rbm.b + v @ rbm.W)))


def reconstruction_error(rbm: Rbm, data) -> float:
    """Mean squared error of a deterministic v -> p(h|v) -> E[v|h] pass."""
    data = _as_rows(data, rbm.n_visible, "data")
    recon = visible_given_hidden(rbm, hidden_given_visible(rbm, data))
    return float(np.mean((data - recon) ** 2))


def _sample(p, rng):
    return (rng.random(p.shape) < p).astype(np.float64)


def cd_step(rbm: Rbm, batch, config: CdConfig, rng: np.random.Generator):
    """One CD-k update on ``batch``; returns ``(new_rbm, mean_squared_error)``.

    Hidden states are sampled during the Gibbs chain; the final visible
    reconstruction uses probabilities (binary) or means (Gaussian) and the
    negative hidden statistics use probabilities.  For the Gaussian model
    the sufficient statistics are taken in ``v / sigma`` units so that the
    update is the CD gradient of the energy above.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise EmptyBatch("cd_step needs a non-empty 2-d batch")
    batch = _as_rows(batch, rbm.n_visible, "batch")
    n = batch.shape[0]

    ph0 = hidden_given_visible(rbm, batch)
    h = _sample(ph0, rng)
    for step in range(config.k):
        vk = visible_given_hidden(rbm, h)
        phk = hidden_given_visible(rbm, vk)
        if step + 1 < config.k:
            h = _sample(phk, rng)

    lr = config.learning_rate / n
    if isinstance(rbm, GaussianRbm):
        s = rbm.sigma
        dW = (batch.T @ ph0 - vk.T @ phk) / s
        dc = (batch.sum(axis=0) - vk.sum(axis=0)) / (s * s)
    else:
        dW = batch.T @ ph0 - vk.T @ phk
        dc = batch.sum(axis=0) - vk.sum(axis=0)
    db = ph0.sum(axis=0) - phk.sum(axis=0)

    err = float(np.mean((batch - vk) ** 2))
    new = dataclasses.replace(rbm, W=rbm.W + lr * dW, b=rbm.b + lr * db, c=rbm.c + lr * dc)
    return new, err


def pretrain_layer(rbm: Rbm, data, config: CdConfig,
                   rng: Optional[np.random.Generator] = None):
    """Run ``config.epochs`` full passes of shuffled mini-batch CD.

    Returns the trained model and the per-epoch mean reconstruction error
    (averaged over the epoch's mini-batches).
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise EmptyDataset("pretrain_layer needs at least one training row")
    data = _as_rows(data, rbm.n_visible, "data")
    if rng is None:
        rng = make_rng(config.seed, "cd")
    n = data.shape[0]
    trace = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        errs = []
        for start in range(0, n, config.batch_size):
            rbm, err = cd_step(rbm, data[order[start:start + config.batch_size]], config, rng)
            errs.append(err)
        trace.append(float(np.mean(errs)))
    return rbm, trace
