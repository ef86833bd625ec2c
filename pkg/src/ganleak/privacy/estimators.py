"""Exact and Monte Carlo estimators of RO-stability and the generalization gap.

A *trainer* is a callable ``trainer(S, rng) -> loss_fn`` where ``loss_fn(x)``
returns phi(d(x; theta)) for each row of ``x`` and ``theta`` is one draw of
the randomized mechanism on dataset ``S``.  Learners over the two-point
domain additionally expose ``distribution_counts`` and ``losses`` so the
expectations over their randomness can be enumerated exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from ..engine import RngStream, as_generator

Z95 = 1.959963984540054


@dataclass
class StabilityEstimate:
    value: float
    half_width: float
    n_probes: int
    n_pairs: int
    n_runs: int
    exact: bool = False
    value_in_sample: float = math.nan
    value_fresh: float = math.nan


@dataclass
class GapEstimate:
    value: float
    half_width: float
    m: int
    n_runs: int
    exact: bool = False
    eval_size: int = 0
    eval_half_width: float = 0.0


def _is_enumerable(trainer) -> bool:
    return hasattr(trainer, "distribution_counts") and getattr(trainer, "n_points", 0) == 2


def exact_ro_stability(learner) -> StabilityEstimate:
    """Uniform RO-stability of a two-point-domain learner by full enumeration.

    A dataset is summarised by its count of ones k; replacing one element
    moves k by one.  The sup runs over every k, both neighbours and both
    domain points.
    """
    m = learner.m
    expected = np.array([learner.distribution_counts([m - k, k]) @ learner.losses for k in range(m + 1)])
    diffs = np.abs(np.diff(expected, axis=0))
    return StabilityEstimate(float(diffs.max()), 0.0, 2, 2 * m, 0, exact=True,
                             value_in_sample=float(diffs.max()), value_fresh=float(diffs.max()))


def estimate_ro_stability(trainer, S, probe_set=None, n_runs: int = 200, rng=0, n_pairs: int = 4,
                          replacements=None) -> StabilityEstimate:
    """Max over adjacent pairs and probes of |E_{A(S)} phi(d(x)) - E_{A(S')} phi(d(x))|.

    ``S'`` replaces one element of ``S`` by a draw from ``replacements``
    (default: ``probe_set``).  Probes are the elements of S and S' plus
    ``probe_set``; the maxima over in-sample and fresh probes are reported
    separately.  Runs on S and S' share seeds (common random numbers), and
    the half-width is the 95% normal interval of the paired difference at
    the maximising (pair, probe).  Two-point-domain learners
    are enumerated exactly.
    """
    if _is_enumerable(trainer):
        return exact_ro_stability(trainer)
    if n_runs < 2:
        raise ValueError("n_runs must be at least 2")
    S = np.asarray(S)
    fresh = np.asarray(S[:0] if probe_set is None else probe_set)
    pool = fresh if replacements is None else np.asarray(replacements)
    if len(pool) == 0:
        raise ValueError("need a probe_set or replacements to form adjacent datasets")
    gen = as_generator(rng)
    master = int(gen.integers(2**32))
    best = (-1.0, 0.0)
    best_in, best_fresh = 0.0, 0.0
    for pair in range(n_pairs):
        i = int(gen.integers(len(S)))
        S2 = S.copy()
        S2[i] = pool[int(gen.integers(len(pool)))]
        probes = np.concatenate([S, S2[i:i + 1], fresh]) if len(fresh) else np.concatenate([S, S2[i:i + 1]])
        n_in = len(S) + 1
        # common random numbers: run r on S and on S' shares its seed
        a = np.stack([trainer(S, RngStream(master, pair, r))(probes) for r in range(n_runs)])
        b = np.stack([trainer(S2, RngStream(master, pair, r))(probes) for r in range(n_runs)])
        paired = a - b
        diff = np.abs(paired.mean(0))
        hw = Z95 * paired.std(0, ddof=1) / np.sqrt(n_runs)
        j = int(np.argmax(diff))
        if diff[j] > best[0]:
            best = (float(diff[j]), float(hw[j]))
        best_in = max(best_in, float(diff[:n_in].max()))
        if len(diff) > n_in:
            best_fresh = max(best_fresh, float(diff[n_in:].max()))
    return StabilityEstimate(best[0], best[1], len(fresh), n_pairs, n_runs,
                             value_in_sample=best_in, value_fresh=best_fresh if len(fresh) else math.nan)


def exact_generalization_gap(learner, p_data) -> GapEstimate:
    """F_U = E_S E_{theta ~ A(S)} [U_hat - U] for a two-point learner, enumerated over k ~ Binomial(m, p)."""
    m = learner.m
    population = (1.0 - p_data.p) * learner.losses[:, 0] + p_data.p * learner.losses[:, 1]
    weights = binom.pmf(np.arange(m + 1), m, p_data.p)
    total = 0.0
    for k, w in enumerate(weights):
        counts = np.array([m - k, k])
        probs = learner.distribution_counts(counts)
        empirical = learner.losses @ counts / m
        total += w * float(probs @ (empirical - population))
    return GapEstimate(total, 0.0, m, 0, exact=True)


def estimate_generalization_gap(trainer, p_data, m: int, n_runs: int = 200, rng=0, eval_size: int | None = None,
                                exact: bool = True) -> GapEstimate:
    """Monte Carlo estimate of F_U: draw S ~ p_data^m, then theta ~ A(S), then compare U_hat(S) with U.

    U is estimated on a fresh sample of ``eval_size`` (default 100 m) points
    per run.  With ``exact`` set and an enumerable learner both expectations
    are computed in closed form instead.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if exact and _is_enumerable(trainer) and hasattr(p_data, "p") and trainer.m == m:
        return exact_generalization_gap(trainer, p_data)
    if n_runs < 2:
        raise ValueError("n_runs must be at least 2")
    eval_size = 100 * m if eval_size is None else eval_size
    if eval_size < 100 * m:
        raise ValueError("the population loss needs an evaluation sample of at least 100 m points")
    gen = as_generator(rng)
    master = int(gen.integers(2**32))
    gaps, eval_vars = np.empty(n_runs), np.empty(n_runs)
    for r in range(n_runs):
        stream = RngStream(master, r)
        S = p_data.sample(m, stream.child(0))
        loss_fn = trainer(S, stream.child(1))
        fresh = loss_fn(p_data.sample(eval_size, stream.child(2)))
        gaps[r] = float(np.mean(loss_fn(S)) - np.mean(fresh))
        eval_vars[r] = float(np.var(fresh, ddof=1)) / eval_size
    half = Z95 * float(np.std(gaps, ddof=1)) / math.sqrt(n_runs)
    eval_hw = Z95 * math.sqrt(float(eval_vars.mean()))
    return GapEstimate(float(gaps.mean()), half, m, n_runs, eval_size=eval_size, eval_half_width=eval_hw)
