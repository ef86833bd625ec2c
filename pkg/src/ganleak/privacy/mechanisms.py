"""Randomized training mechanisms with a known privacy cost.

The toy learners work on a two-point data domain {0, 1} so that every
quantity (output distribution, RO-stability, generalization gap) can be
enumerated exactly.  ``NoisyLogisticTrainer`` is a small neural-style
discriminator trained with clipped, Laplace-noised gradients and basic
composition accounting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from ..engine import Parameter, Tensor, as_generator, grad, log, sigmoid, tsum
from ..gan.losses import LOG_CLAMP, MeasuringFunction


@dataclass
class DpParams:
    epsilon: float
    mechanism: str
    sensitivity: float
    steps: int = 1
    note: str = "basic composition"

    def __post_init__(self):
        if self.epsilon < 0 or self.sensitivity <= 0:
            raise ValueError("epsilon must be >= 0 and sensitivity > 0")


@dataclass
class EpsAccountant:
    """Basic (additive) composition of per-step privacy costs."""

    steps: list[float] = field(default_factory=list)

    def spend(self, eps: float) -> None:
        if eps < 0:
            raise ValueError("per-step epsilon must be non-negative")
        self.steps.append(eps)

    @property
    def total(self) -> float:
        return math.fsum(self.steps)


# -- exponential mechanism ---------------------------------------------------------------
def exp_mechanism_probs(scores, epsilon: float, sensitivity: float) -> np.ndarray:
    """P(h) proportional to exp(eps * score(h) / (2 * sensitivity))."""
    if epsilon < 0 or sensitivity <= 0:
        raise ValueError("epsilon must be >= 0 and sensitivity > 0")
    logits = epsilon * np.asarray(scores, dtype=np.float64) / (2.0 * sensitivity)
    return np.exp(logits - logsumexp(logits))


def exp_mechanism_select(hypotheses, score: Callable, data, epsilon: float, sensitivity: float, rng):
    """Sample one hypothesis with the exponential mechanism."""
    hypotheses = list(hypotheses)
    if not hypotheses:
        raise ValueError("hypothesis class is empty")
    probs = exp_mechanism_probs([score(h, data) for h in hypotheses], epsilon, sensitivity)
    return hypotheses[int(as_generator(rng).choice(len(hypotheses), p=probs))]


@dataclass
class HypothesisClass:
    """Finite set of discriminators on the domain {0, ..., n_points-1}.

    ``table[h, x]`` is d_h(x).
    """

    table: np.ndarray

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.float64)
        if self.table.ndim != 2 or len(self.table) == 0:
            raise ValueError("hypothesis table must be a non-empty (|H|, |X|) array")
        if len(self.table) > 64:
            raise ValueError("hypothesis classes are limited to 64 members")

    def __len__(self) -> int:
        return len(self.table)

    @classmethod
    def grid(cls, n: int = 8, low: float = math.exp(-1.0), high: float = 0.95) -> "HypothesisClass":
        """n discriminators trading off d(0) against d(1) over [low, high]."""
        a = np.linspace(low, high, n)
        return cls(np.stack([a, a[::-1]], axis=1))


def _counts_table(values: np.ndarray, n_points: int) -> np.ndarray:
    return np.bincount(np.asarray(values, dtype=int), minlength=n_points)


class ExponentialMechanismLearner:
    """Selects h in H by the exponential mechanism with utility U_hat_real(h, S).

    The utility is mean_{x in S} phi(d_h(x)); its replace-one sensitivity is
    (max - min of phi(d_h(x))) / m.  With d_h in [e^-1, 1] and phi = log the
    per-example loss lies in [-1, 0], the bounded range the stability
    argument needs.
    """

    private = True

    def __init__(self, H: HypothesisClass, epsilon: float, m: int, phi: MeasuringFunction = MeasuringFunction.LOG):
        if epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        self.H, self.epsilon, self.m, self.phi = H, float(epsilon), int(m), phi
        self.losses = np.log(H.table) if phi is MeasuringFunction.LOG else H.table.copy()
        spread = float(self.losses.max() - self.losses.min())
        self.sensitivity = max(spread, 1e-12) / self.m
        self.dp = DpParams(self.epsilon, "ExponentialMechanism", self.sensitivity)

    @property
    def n_points(self) -> int:
        return self.H.table.shape[1]

    def utility(self, counts: np.ndarray) -> np.ndarray:
        return self.losses @ counts / counts.sum()

    def distribution(self, data) -> np.ndarray:
        """Exact output distribution over H for dataset ``data`` (values) ."""
        counts = _counts_table(data, self.n_points)
        if counts.sum() != self.m:
            raise ValueError(f"learner was configured for m={self.m}, got {counts.sum()} examples")
        return exp_mechanism_probs(self.utility(counts), self.epsilon, self.sensitivity)

    def distribution_counts(self, counts) -> np.ndarray:
        return exp_mechanism_probs(self.utility(np.asarray(counts)), self.epsilon, self.sensitivity)

    def __call__(self, data, rng) -> Callable[[np.ndarray], np.ndarray]:
        h = int(as_generator(rng).choice(len(self.H), p=self.distribution(data)))
        losses = self.losses[h]
        return lambda x: losses[np.asarray(x, dtype=int)]


class NonPrivateArgmaxLearner(ExponentialMechanismLearner):
    """Deterministic empirical-risk maximiser over H (no privacy guarantee)."""

    private = False

    def __init__(self, H: HypothesisClass, m: int, phi: MeasuringFunction = MeasuringFunction.LOG):
        super().__init__(H, 0.0, m, phi)
        self.dp = None

    def distribution_counts(self, counts) -> np.ndarray:
        u = self.utility(np.asarray(counts))
        best = np.isclose(u, u.max(), rtol=0, atol=1e-12)
        return best / best.sum()

    def distribution(self, data) -> np.ndarray:
        return self.distribution_counts(_counts_table(data, self.n_points))


class PostProcessed:
    """A data-independent randomized map applied to another learner's output.

    ``kernel[h, h2]`` is the probability of reporting hypothesis ``h2`` of
    ``target`` when the base learner picked ``h``.
    """

    def __init__(self, base, kernel, target: HypothesisClass):
        kernel = np.asarray(kernel, dtype=np.float64)
        if kernel.shape != (len(base.H), len(target)) or np.any(kernel < 0) or not np.allclose(kernel.sum(1), 1):
            raise ValueError("kernel must be a row-stochastic (|H|, |H'|) matrix")
        self.base, self.kernel, self.H = base, kernel, target
        self.m, self.phi, self.epsilon = base.m, base.phi, base.epsilon
        self.private = base.private
        self.losses = np.log(target.table) if base.phi is MeasuringFunction.LOG else target.table.copy()

    @property
    def n_points(self) -> int:
        return self.H.table.shape[1]

    def distribution_counts(self, counts) -> np.ndarray:
        return self.base.distribution_counts(counts) @ self.kernel

    def __call__(self, data, rng):
        gen = as_generator(rng)
        probs = self.base.distribution(data) @ self.kernel
        losses = self.losses[int(gen.choice(len(self.H), p=probs))]
        return lambda x: losses[np.asarray(x, dtype=int)]


@dataclass(frozen=True)
class TwoPointDistribution:
    """p_data on {0, 1} with P(x = 1) = p."""

    p: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    def sample(self, n: int, rng) -> np.ndarray:
        return (as_generator(rng).random(n) < self.p).astype(int)

    def expectation(self, losses: np.ndarray) -> float:
        return float((1.0 - self.p) * losses[0] + self.p * losses[1])


class DataIndependentTrainer:
    """Ignores its data: draws a hypothesis uniformly (a 0-DP mechanism).

    ``losses[h, x]`` is the loss table over a discrete domain; ``m`` is the
    dataset size it is configured for.
    """

    private = True
    epsilon = 0.0

    def __init__(self, losses: np.ndarray, m: int | None = None):
        self.losses = np.atleast_2d(np.asarray(losses, dtype=np.float64))
        self.m = m

    @property
    def n_points(self) -> int:
        return self.losses.shape[1]

    def distribution_counts(self, counts) -> np.ndarray:
        return np.full(len(self.losses), 1.0 / len(self.losses))

    def __call__(self, data, rng):
        row = self.losses[int(as_generator(rng).integers(len(self.losses)))]
        return lambda x: row[np.asarray(x, dtype=int)]


class MemorizingScorer:
    """Non-private positive control: d(x) = exp(-min(1, dist(x, S) / tau)).

    Every training example gets loss 0 while fresh points are penalised, so
    the empirical loss overstates the population loss.
    """

    private = False
    epsilon = None

    def __init__(self, tau: float = 0.05):
        self.tau = tau

    def __call__(self, data, rng):
        S = np.asarray(data, dtype=np.float64).reshape(len(data), -1)

        def losses(x):
            x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
            dist = np.sqrt(((x[:, None, :] - S[None, :, :]) ** 2).sum(-1)).min(axis=1)
            return -np.minimum(1.0, dist / self.tau)

        return losses


# -- noisy clipped gradient descent ----------------------------------------------------------
def clip_per_example(per_example_grads, clip_norm: float) -> tuple[list[np.ndarray], np.ndarray]:
    """Scale each example's joint gradient (over all parameters) to L2 norm <= clip_norm."""
    if clip_norm <= 0:
        raise ValueError("clip_norm must be positive")
    grads = [np.asarray(getattr(g, "data", g), dtype=np.float64) for g in per_example_grads]
    m = len(grads[0])
    flat = np.concatenate([g.reshape(m, -1) for g in grads], axis=1)
    if not np.all(np.isfinite(flat)):
        raise FloatingPointError("non-finite per-example gradient")
    norms = np.linalg.norm(flat, axis=1)
    factor = np.minimum(1.0, clip_norm / np.maximum(norms, 1e-300))
    return [g * factor.reshape((m,) + (1,) * (g.ndim - 1)) for g in grads], norms


def laplace_step_epsilon(clip_norm: float, batch_size: int, laplace_scale: float, dim: int) -> float:
    """Privacy cost of one noisy averaged-gradient release.

    Replacing one example moves the clipped mean by at most 2C/m in L2, i.e.
    2 sqrt(dim) C / m in L1; Laplace noise of scale b per coordinate then
    gives eps = L1-sensitivity / b.
    """
    if laplace_scale <= 0 or clip_norm <= 0 or batch_size < 1 or dim < 1:
        raise ValueError("invalid noisy-step parameters")
    if math.isinf(laplace_scale):
        return 0.0
    return 2.0 * math.sqrt(dim) * clip_norm / (batch_size * laplace_scale)


def noisy_grad_step(params, per_example_grads, clip_norm: float, laplace_scale: float, rng, lr: float = 0.1,
                    accountant: EpsAccountant | None = None, extra_grads=None, ascent: bool = False) -> float:
    """Clip, average, add Laplace noise, take an SGD step; returns the step epsilon.

    ``extra_grads`` are data-independent gradient terms (e.g. from fixed
    fake samples) added after the noise; they cost no privacy.
    """
    clipped, _ = clip_per_example(per_example_grads, clip_norm)
    m = len(clipped[0])
    dim = sum(int(np.prod(p.shape)) for p in params)
    gen = as_generator(rng)
    eps = laplace_step_epsilon(clip_norm, m, laplace_scale, dim)
    sign = 1.0 if ascent else -1.0
    for i, (p, g) in enumerate(zip(params, clipped)):
        step = g.mean(axis=0)
        if math.isfinite(laplace_scale):
            step = step + gen.laplace(0.0, laplace_scale, size=p.shape)
        else:
            step = np.zeros(p.shape)
        if extra_grads is not None:
            step = step + np.asarray(getattr(extra_grads[i], "data", extra_grads[i]))
        p.data = p.data + sign * lr * step
    if accountant is not None:
        accountant.spend(eps)
    return eps


class NoisyLogisticTrainer:
    """Logistic discriminator d(x) = sigmoid(w.x + b) trained by noisy clipped gradient ascent on U_hat.

    The real-data term uses clipped per-example gradients plus Laplace
    noise; the fake term uses a fixed, data-independent set of uniform
    samples.  Parameters are projected onto an L2 ball of radius ``radius``
    after each step (post-processing), which keeps phi(d(x)) bounded.
    Checkpoints are the parameters after every ``checkpoint_every`` steps,
    starting with the data-independent initialisation at k = 0.
    """

    private = True

    def __init__(self, dim: int = 2, m: int = 64, steps: int = 200, clip_norm: float = 1.0,
                 laplace_scale: float = 100.0, lr: float = 0.05, radius: float = 1.0, n_fake: int = 64,
                 checkpoint_every: int = 50):
        self.dim, self.m, self.steps = dim, m, steps
        self.clip_norm, self.laplace_scale, self.lr, self.radius = clip_norm, laplace_scale, lr, radius
        self.n_fake, self.checkpoint_every = n_fake, checkpoint_every
        self.epsilon = steps * laplace_step_epsilon(clip_norm, m, laplace_scale, dim + 1)

    @classmethod
    def for_total_epsilon(cls, epsilon: float, **kw) -> "NoisyLogisticTrainer":
        probe = cls(**kw)
        per_step = epsilon / probe.steps
        scale = laplace_step_epsilon(probe.clip_norm, probe.m, 1.0, probe.dim + 1) / per_step
        return cls(**{**kw, "laplace_scale": scale})

    @staticmethod
    def losses(theta: np.ndarray, x) -> np.ndarray:
        """phi(d(x)) = log sigmoid(w.x + b), clamped like the GAN losses."""
        x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
        z = x @ theta[:-1] + theta[-1]
        d = np.clip(1.0 / (1.0 + np.exp(-z)), LOG_CLAMP, 1.0 - LOG_CLAMP)
        return np.log(d)

    def run(self, data, rng) -> list[tuple[int, np.ndarray]]:
        gen = as_generator(rng)
        x = np.asarray(data, dtype=np.float64).reshape(len(data), -1)
        if len(x) != self.m:
            raise ValueError(f"trainer configured for m={self.m}, got {len(x)}")
        fake = gen.uniform(-1.0, 1.0, size=(self.n_fake, self.dim))
        w = Parameter(gen.normal(0.0, 0.02, size=self.dim), "weight", 0, "w")
        b = Parameter(np.zeros(1), "bias", 0, "b")
        accountant = EpsAccountant()
        checkpoints = [(0, np.r_[w.data, b.data])]
        for step in range(1, self.steps + 1):
            # per-example gradients in one pass: each row owns a copy of the parameters
            w_rep = Tensor(np.tile(w.data, (self.m, 1)), requires_grad=True)
            b_rep = Tensor(np.tile(b.data, self.m), requires_grad=True)
            real = tsum(log(sigmoid(tsum(Tensor(x) * w_rep, axis=1) + b_rep)))
            gw, gb = grad(real, [w_rep, b_rep])
            fake_term = tsum(log(1.0 - sigmoid(Tensor(fake) @ w.reshape(self.dim, 1) + b))) * (1.0 / self.n_fake)
            fw, fb = grad(fake_term, [w, b])
            noisy_grad_step([w, b], [gw.data, gb.data.reshape(self.m, 1)], self.clip_norm, self.laplace_scale,
                            gen, self.lr, accountant, extra_grads=[fw.data, fb.data], ascent=True)
            theta = np.r_[w.data, b.data]
            norm = np.linalg.norm(theta)
            if norm > self.radius:
                theta = theta * (self.radius / norm)
                w.data, b.data = theta[:-1].copy(), theta[-1:].copy()
            if step % self.checkpoint_every == 0 or step == self.steps:
                checkpoints.append((step, theta.copy()))
        self.last_epsilon = accountant.total
        return checkpoints

    def __call__(self, data, rng):
        theta = self.run(data, rng)[-1][1]
        return lambda x: self.losses(theta, x)
