"""Training the selector with straight-through Gumbel-softmax samples.

Each predicted frame draws a relaxed two-way sample from the GoP's logits;
the hard sample fixes the structure that is rolled through the backend. The
backend is not differentiable, so the objective is relaxed multilinearly:
with per-frame P-weights ``y_t`` it is the expectation of the GoP objective
over independent frame choices. At a hard sample its partial derivative in
``y_t`` is the objective difference from flipping frame ``t``, which is what
the straight-through backward pass feeds into the soft sample's Jacobian.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..dvmp import softmax_vjp
from ..gop import from_binary
from ..search import objective, rollout
from .features import aggregate_features
from .model import materialize, score, zero_weights


class TrainingDiverged(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"selector training diverged at step {step}")
        self.step = step


class _Item:
    """One GoP with a cache of objective values per binary structure."""

    def __init__(self, inp, backend, lam):
        self.features = aggregate_features(inp)
        self.length = inp.n_predicted
        self.backend = backend
        self.lam = lam
        self._cache: dict = {}

    def cost(self, bits) -> float:
        bits = tuple(int(b) for b in bits)
        c = self._cache.get(bits)
        if c is None:
            c = objective(rollout(self.backend, from_binary(bits)), self.lam)
            self._cache[bits] = c
        return c


def _soft_samples(weights, features, noise, tau):
    z = weights @ features
    a = (z[None, :] + noise) / tau
    a -= a.max(axis=1, keepdims=True)
    e = np.exp(a)
    return z, e / e.sum(axis=1, keepdims=True)


def relaxed_objective(item: _Item, p_frame) -> float:
    """Expected objective with frame ``t`` a P frame with probability ``p_frame[t]``.

    Enumerates all structures; meant for small GoPs (checks, not training).
    """
    total = 0.0
    for bits in itertools.product((0, 1), repeat=item.length):
        w = 1.0
        for b, p in zip(bits, p_frame):
            w *= p if b else 1.0 - p
        total += w * item.cost(bits)
    return total


def _relaxed_partials(item: _Item, p_frame) -> np.ndarray:
    grads = np.zeros((item.length, 2))
    for t in range(item.length):
        for b in (1, 0):
            total = 0.0
            for rest in itertools.product((0, 1), repeat=item.length - 1):
                bits = rest[:t] + (b,) + rest[t:]
                w = 1.0
                for j, bj in enumerate(bits):
                    if j != t:
                        w *= p_frame[j] if bj else 1.0 - p_frame[j]
                total += w * item.cost(bits)
            grads[t, 0 if b else 1] = total
    return grads


def _flip_partials(item: _Item, bits) -> np.ndarray:
    grads = np.zeros((item.length, 2))
    for t in range(item.length):
        on = bits[:t] + (1,) + bits[t + 1:]
        off = bits[:t] + (0,) + bits[t + 1:]
        grads[t] = item.cost(on), item.cost(off)
    return grads


def sample_gradient(weights, item: _Item, noise, tau: float, at: str = "hard"):
    """Gradient of the relaxed objective w.r.t. the 2x8 weights for one GoP.

    ``at="hard"`` is the straight-through estimate used in training;
    ``at="soft"`` differentiates the relaxation exactly at the soft sample.
    Returns ``(objective_at_sample, grad)``.
    """
    _, y = _soft_samples(weights, item.features, noise, tau)
    if at == "hard":
        bits = tuple(int(v) for v in (y[:, 0] >= y[:, 1]))
        upstream = _flip_partials(item, bits)
        value = item.cost(bits)
    elif at == "soft":
        upstream = _relaxed_partials(item, y[:, 0])
        value = relaxed_objective(item, y[:, 0])
    else:
        raise ValueError(f"unknown gradient point {at!r}")
    dz = softmax_vjp(y, upstream, tau).sum(axis=0)
    return value, np.outer(dz, item.features)


def soft_objective(weights, item: _Item, noise, tau: float) -> float:
    _, y = _soft_samples(weights, item.features, noise, tau)
    return relaxed_objective(item, y[:, 0])


@dataclass
class TrainResult:
    weights: np.ndarray
    log: list[tuple[int, float, float]] = field(default_factory=list)
    sample_objective: list[float] = field(default_factory=list)

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "mean_objective", "mean_p_P"])
            for epoch, obj, p in self.log:
                w.writerow([epoch, repr(obj), repr(p)])


def evaluate(weights, items) -> tuple[float, float]:
    """Mean inference-time objective and mean ``p_P`` over a dataset."""
    objs = []
    ps = []
    for it in items:
        p = float(score(it.features, weights)[0])
        if not math.isfinite(p):
            raise FloatingPointError("selector score is not finite")
        ps.append(p)
        objs.append(it.cost(materialize(p, it.length)))
    return float(np.mean(objs)), float(np.mean(ps))


def temperature_at(epoch: int, epochs: int, schedule) -> float:
    start, end = schedule
    if epochs <= 1:
        return float(end)
    return float(start * (end / start) ** (epoch / (epochs - 1)))


def train_selector(
    dataset,
    lam: float = 1.0,
    temperatures=(1.0, 0.3),
    lr: float = 0.5,
    epochs: int = 60,
    seed=0,
    init=None,
) -> TrainResult:
    """Full-batch training over ``(PreAnalysisInput, backend)`` pairs.

    One update per epoch: every GoP draws fresh Gumbel noise per frame, the
    straight-through gradients are averaged in dataset order, and the weights
    take a plain gradient step. The log holds the inference objective and
    mean ``p_P`` before training (epoch 0) and after each epoch.
    """
    if not dataset:
        raise ValueError("training needs at least one GoP")
    items = [_Item(inp, backend, lam) for inp, backend in dataset]
    rng = np.random.default_rng(seed)
    weights = zero_weights() if init is None else np.array(init, dtype=np.float64)
    if weights.shape != zero_weights().shape or not np.all(np.isfinite(weights)):
        raise ValueError("initial weights must be a finite 2x8 array")
    result = TrainResult(weights)
    result.log.append((0, *evaluate(weights, items)))
    step = 0
    for epoch in range(1, epochs + 1):
        tau = temperature_at(epoch - 1, epochs, temperatures)
        grad = np.zeros_like(weights)
        total = 0.0
        for it in items:
            noise = rng.gumbel(size=(it.length, 2))
            value, g = sample_gradient(weights, it, noise, tau)
            total += value
            grad += g
        step += 1
        with np.errstate(over="ignore", invalid="ignore"):
            weights = weights - lr * grad / len(items)
            mean_obj = total / len(items)
            if not (math.isfinite(mean_obj) and np.all(np.isfinite(weights))):
                raise TrainingDiverged(step)
            try:
                result.log.append((epoch, *evaluate(weights, items)))
            except FloatingPointError:
                raise TrainingDiverged(step) from None
        result.sample_objective.append(mean_obj)
    result.weights = weights
    return result


def prepare(dataset, lam: float) -> list[_Item]:
    return [_Item(inp, backend, lam) for inp, backend in dataset]
