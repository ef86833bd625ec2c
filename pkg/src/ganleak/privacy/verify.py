"""End-to-end checks of the privacy -> stability -> generalization chain."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ..data.datasets import GaussianRingConfig, synth_gaussian_ring
from ..engine import RngStream
from .bounds import dp_stability_bound, mcdiarmid_tail
from .estimators import GapEstimate, StabilityEstimate, Z95, estimate_generalization_gap, estimate_ro_stability
from .mechanisms import (DataIndependentTrainer, ExponentialMechanismLearner, HypothesisClass,
                         NonPrivateArgmaxLearner, NoisyLogisticTrainer, TwoPointDistribution)

AUDIT_COLUMNS = ("mechanism", "epsilon", "stability_bound", "stability_measured", "stability_ci",
                 "gap_measured", "gap_ci", "pass")


@dataclass(frozen=True)
class ChainConfig:
    mechanism: str = "exponential"  # exponential | argmax | constant
    epsilon: float = 0.1
    m: int = 20
    n_hypotheses: int = 8
    p: float = 0.3
    n_runs: int = 200
    seed: int = 0
    exact: bool = True


@dataclass
class ChainReport:
    mechanism: str
    epsilon: float | None
    stability_bound: float | None
    stability: StabilityEstimate
    gap: GapEstimate
    stability_pass: bool | None
    gap_pass: bool | None

    @property
    def private(self) -> bool:
        return self.epsilon is not None

    @property
    def passed(self) -> bool | None:
        if not self.private:
            return None
        return bool(self.stability_pass and self.gap_pass)

    def row(self) -> dict:
        fmt = lambda v: "N/A" if v is None else f"{v:.6g}"  # noqa: E731
        return {"mechanism": self.mechanism, "epsilon": fmt(self.epsilon),
                "stability_bound": fmt(self.stability_bound),
                "stability_measured": f"{self.stability.value:.6g}", "stability_ci": f"{self.stability.half_width:.3g}",
                "gap_measured": f"{self.gap.value:.6g}", "gap_ci": f"{self.gap.half_width:.3g}",
                "pass": "N/A" if self.passed is None else str(self.passed).lower()}


def build_learner(config: ChainConfig):
    H = HypothesisClass.grid(config.n_hypotheses)
    if config.mechanism == "exponential":
        return ExponentialMechanismLearner(H, config.epsilon, config.m)
    if config.mechanism == "argmax":
        return NonPrivateArgmaxLearner(H, config.m)
    if config.mechanism == "constant":
        return DataIndependentTrainer(np.log(H.table), config.m)
    raise ValueError(f"unknown mechanism {config.mechanism!r}")


def verify_dp_chain(config: ChainConfig) -> ChainReport:
    """Measure stability and gap and compare them with e^eps - 1.

    Checks: stability <= e^eps - 1 + ci, and |gap| <= stability + combined ci.
    Non-private learners get both measurements but no verdict.
    """
    learner = build_learner(config)
    p_data = TwoPointDistribution(config.p)
    stream = RngStream(config.seed)
    S = p_data.sample(config.m, stream.child(0))
    stability = estimate_ro_stability(learner, S, probe_set=np.array([0, 1]), n_runs=config.n_runs,
                                      rng=stream.child(1))
    gap = estimate_generalization_gap(learner, p_data, config.m, n_runs=config.n_runs, rng=stream.child(2),
                                      exact=config.exact)
    private = getattr(learner, "private", False)
    eps = getattr(learner, "epsilon", None) if private else None
    if eps is None:
        return ChainReport(config.mechanism, None, None, stability, gap, None, None)
    bound = dp_stability_bound(eps)
    tol = 1e-12
    stab_ok = stability.value <= bound + stability.half_width + tol
    gap_ok = abs(gap.value) <= stability.value + stability.half_width + gap.half_width + tol
    return ChainReport(config.mechanism, eps, bound, stability, gap, stab_ok, gap_ok)


@dataclass(frozen=True)
class ConvergenceConfig:
    epsilon: float = 0.1
    m: int = 64
    steps: int = 200
    checkpoint_every: int = 50
    n_runs: int = 200
    t_grid: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0, 1.25)
    eval_factor: int = 100
    seed: int = 0
    ring: GaussianRingConfig = GaussianRingConfig(std=0.2)


@dataclass
class ConvergenceRow:
    iteration: int
    t: float
    exceed_freq: float
    bound: float
    bound_raw: float
    mean_signed_gap: float
    gap_sem: float

    @property
    def passed(self) -> bool:
        return self.exceed_freq <= self.bound


@dataclass
class ConvergenceReport:
    epsilon: float
    m: int
    n_runs: int
    rows: list[ConvergenceRow] = field(default_factory=list)
    deviations: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def bound_is_k_independent(self) -> bool:
        by_t: dict[float, set] = {}
        for r in self.rows:
            by_t.setdefault(r.t, set()).add(r.bound_raw)
        return all(len(v) == 1 for v in by_t.values())


def ring_sampler(ring: GaussianRingConfig):
    def sample(n, rng):
        return synth_gaussian_ring(GaussianRingConfig(ring.n_modes, ring.radius, ring.std, n), rng).examples
    return sample


def verify_uniform_convergence(trainer: NoisyLogisticTrainer | None, config: ConvergenceConfig) -> ConvergenceReport:
    """Per-checkpoint frequency of |U_hat - U| >= t against the McDiarmid tail.

    Each run draws a fresh S of size m from the ring, trains with its own
    seed and records every checkpoint; U at a checkpoint is estimated on
    ``eval_factor * m`` fresh points.  Only the real-data term of the loss
    differs between U_hat and U (the fake term uses the same generator
    samples), so the deviation is computed on that term.
    """
    if trainer is None:
        trainer = NoisyLogisticTrainer.for_total_epsilon(config.epsilon, m=config.m, steps=config.steps,
                                                         checkpoint_every=config.checkpoint_every)
    if trainer.m != config.m:
        raise ValueError("trainer and config disagree on m")
    sample = ring_sampler(config.ring)
    devs: dict[int, list[float]] = {}
    for r in range(config.n_runs):
        stream = RngStream(config.seed, r)
        S = sample(config.m, stream.child(0))
        fresh = sample(config.eval_factor * config.m, stream.child(1))
        checkpoints = trainer.run(S, stream.child(2))
        if not checkpoints:
            raise ValueError("trainer emitted no checkpoints")
        for k, theta in checkpoints:
            devs.setdefault(k, []).append(float(trainer.losses(theta, S).mean() - trainer.losses(theta, fresh).mean()))
    eps = trainer.epsilon
    report = ConvergenceReport(eps, config.m, config.n_runs)
    for k in sorted(devs):
        d = np.asarray(devs[k])
        report.deviations[k] = d
        sem = float(np.std(d, ddof=1) / math.sqrt(len(d))) if len(d) > 1 else math.nan
        for t in config.t_grid:
            tail = mcdiarmid_tail(t, config.m, eps)
            report.rows.append(ConvergenceRow(k, t, float(np.mean(np.abs(d) >= t)), tail.bound, tail.raw,
                                              float(d.mean()), sem))
    return report


def write_audit_csv(path, reports: list[ChainReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=AUDIT_COLUMNS)
        w.writeheader()
        for rep in reports:
            w.writerow(rep.row())


def write_convergence_csv(path, report: ConvergenceReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "t", "exceed_freq", "bound", "bound_raw", "mean_signed_gap", "gap_sem", "pass"])
        for r in report.rows:
            w.writerow([r.iteration, r.t, f"{r.exceed_freq:.6g}", f"{r.bound:.6g}", f"{r.bound_raw:.6g}",
                        f"{r.mean_signed_gap:.6g}", f"{r.gap_sem:.3g}", str(r.passed).lower()])


def summarize(reports: list[ChainReport]) -> str:
    lines = []
    for rep in reports:
        verdict = "N/A (non-private)" if rep.passed is None else ("PASS" if rep.passed else "FAIL")
        eps = "-" if rep.epsilon is None else f"{rep.epsilon:g}"
        lines.append(f"{rep.mechanism:12s} eps={eps:>6s} stability={rep.stability.value:.4g}"
                     f" gap={rep.gap.value:+.4g} {verdict}")
    return "\n".join(lines)


__all__ = ["AUDIT_COLUMNS", "ChainConfig", "ChainReport", "ConvergenceConfig", "ConvergenceReport",
           "ConvergenceRow", "Z95", "build_learner", "verify_dp_chain", "verify_uniform_convergence",
           "write_audit_csv", "write_convergence_csv", "summarize"]
