"""Independent reference computations used by the tests.

Nothing here calls the code paths it is used to check.
"""

import itertools
import math
from fractions import Fraction

import numpy as np


def binary_states(n):
    return [np.array(s, dtype=float) for s in itertools.product((0.0, 1.0), repeat=n)]


def energy_binary_loops(W, b, c, v, h):
    m, n = W.shape
    e = 0.0
    for i in range(m):
        for j in range(n):
            e -= v[i] * W[i, j] * h[j]
    e -= sum(b[j] * h[j] for j in range(n))
    e -= sum(c[i] * v[i] for i in range(m))
    return e


def energy_gaussian_loops(W, b, c, sigma, v, h):
    m, n = W.shape
    e = sum((v[i] - c[i]) ** 2 for i in range(m)) / (2 * sigma ** 2)
    for i in range(m):
        for j in range(n):
            e -= v[i] * W[i, j] * h[j] / sigma
    e -= sum(b[j] * h[j] for j in range(n))
    return e


def enumerated_hidden_marginals(energy_of_h, n_hidden):
    """P(h_j = 1 | v) from exp(-E) summed over all 2^n hidden states."""
    states = binary_states(n_hidden)
    energies = np.array([energy_of_h(h) for h in states])
    shift = energies.min()
    weights = np.exp(-(energies - shift))
    z = weights.sum()
    return np.array([sum(w for w, h in zip(weights, states) if h[j] == 1.0) / z
                     for j in range(n_hidden)]), states, weights / z


def enumerated_free_energy(energy_of_h, n_hidden):
    """-log sum_h exp(-E(v, h))."""
    energies = np.array([energy_of_h(h) for h in binary_states(n_hidden)])
    shift = energies.min()
    return shift - math.log(np.exp(-(energies - shift)).sum())


def ap_recall_walk(scores, is_positive):
    """AP as the area under the stepwise precision/recall walk, in exact arithmetic."""
    items = sorted(range(len(scores)), key=lambda i: -scores[i])  # sorted() is stable
    n_pos = sum(bool(p) for p in is_positive)
    tp = fp = 0
    prev_recall = Fraction(0)
    area = Fraction(0)
    for i in items:
        if is_positive[i]:
            tp += 1
        else:
            fp += 1
        recall = Fraction(tp, n_pos)
        area += Fraction(tp, tp + fp) * (recall - prev_recall)
        prev_recall = recall
    return float(area)


def central_differences(f, params, step=1e-5):
    """Numerical gradient of scalar f(params) for every entry of every array in params."""
    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for idx in range(flat.size):
            old = flat[idx]
            flat[idx] = old + step
            up = f(params)
            flat[idx] = old - step
            down = f(params)
            flat[idx] = old
            gflat[idx] = (up - down) / (2 * step)
        grads[name] = g
    return grads


def max_relative_error(a, b, floor=1e-6):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))
