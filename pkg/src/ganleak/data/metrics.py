from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..engine import Adam, Linear, RngStream, Tensor, exp, grad, leaky_relu, log, mean, no_grad, tsum
from .datasets import Dataset


class Gap(NamedTuple):
    value: float
    signed: float


def gap_from_losses(train_loss: float, heldout_loss: float) -> Gap:
    """|heldout - train|, with the signed difference alongside."""
    signed = float(heldout_loss) - float(train_loss)
    return Gap(abs(signed), signed)


@dataclass
class ChannelStats:
    mean: np.ndarray
    std: np.ndarray


def channel_stddev(dataset) -> ChannelStats:
    """Population mean and standard deviation per channel on the [0, 1] scale."""
    x = np.asarray(dataset.examples if isinstance(dataset, Dataset) else dataset, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("channel statistics need a non-empty dataset")
    x = (x + 1.0) / 2.0
    if x.ndim == 4:
        per_channel = np.moveaxis(x, 1, 0).reshape(x.shape[1], -1)
    else:
        per_channel = x.reshape(1, -1)
    return ChannelStats(per_channel.mean(axis=1), per_channel.std(axis=1))


def _log_softmax(logits: Tensor) -> Tensor:
    shift = Tensor(logits.data.max(axis=1, keepdims=True))
    z = logits - shift
    return z - log(tsum(exp(z), axis=1, keepdims=True))


class ScoreClassifier:
    """Small softmax MLP used in place of an ImageNet network for the classifier score.

    Train it once with :meth:`fit` on labelled synthetic data, then treat it
    as frozen.
    """

    def __init__(self, in_dim: int, n_classes: int, hidden: int = 64, seed: int = 0):
        rng = RngStream(seed).generator
        self.n_classes = n_classes
        self.hidden = Linear(in_dim, hidden, rng, 0, "C.", init_std=1.0 / np.sqrt(in_dim))
        self.out = Linear(hidden, n_classes, rng, 1, "C.", init_std=1.0 / np.sqrt(hidden))
        self.frozen = False

    def parameters(self):
        return [*self.hidden.parameters(), *self.out.parameters()]

    def _logits(self, x) -> Tensor:
        return self.out(leaky_relu(self.hidden(np.asarray(x, dtype=np.float64).reshape(len(x), -1))))

    def fit(self, x, y, steps: int = 400, lr: float = 1e-2, batch: int = 128, seed: int = 0) -> "ScoreClassifier":
        if self.frozen:
            raise RuntimeError("classifier is frozen")
        x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
        y = np.asarray(y, dtype=int)
        onehot = np.eye(self.n_classes)[y]
        opt = Adam(self.parameters(), lr=lr, beta1=0.9)
        gen = RngStream(seed, 1).generator
        for _ in range(steps):
            idx = gen.integers(0, len(x), size=min(batch, len(x)))
            loss = -mean(tsum(_log_softmax(self._logits(x[idx])) * Tensor(onehot[idx]), axis=1))
            opt.step(grad(loss, self.parameters()))
        self.frozen = True
        return self

    def predict_proba(self, x) -> np.ndarray:
        with no_grad():
            p = np.exp(_log_softmax(self._logits(x)).data)
        return p / p.sum(axis=1, keepdims=True)

    def accuracy(self, x, y) -> float:
        return float(np.mean(self.predict_proba(x).argmax(axis=1) == np.asarray(y)))


def classifier_score_from_probs(probs) -> float:
    """exp(E_x KL(p(y|x) || p(y))) for a matrix of conditional label distributions."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2 or len(p) == 0:
        raise ValueError("need a non-empty (n_samples, n_classes) probability matrix")
    marginal = p.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(p) - np.log(marginal)), 0.0)
    kl = terms.sum(axis=1)
    return float(np.exp(np.mean(kl)))


def classifier_score(samples, clf: ScoreClassifier) -> float:
    if len(samples) == 0:
        raise ValueError("classifier score needs at least one sample")
    return classifier_score_from_probs(clf.predict_proba(samples))
