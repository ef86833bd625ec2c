"""Experiment runner: train -> attack -> metrics, aggregated into result tables."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..data.datasets import (Dataset, GaussianRingConfig, PatternConfig, fixed_partition, split_train_holdout,
                             synth_gaussian_ring, synth_patterns, write_manifest)
from ..data.images import load_image_folder, save_grid
from ..data.metrics import ScoreClassifier, classifier_score, gap_from_losses
from ..engine import RngStream
from ..gan.training import TrainConfig, TrainResult, train
from ..membership import (AttackResult, ShadowConfig, blackbox_attack, build_attack_testset, whitebox_attack)
from ..privacy.verify import (ChainConfig, ConvergenceConfig, summarize, verify_dp_chain,
                              verify_uniform_convergence, write_audit_csv, write_convergence_csv)
from .config import AuditConfig, ExperimentConfig
from .io import ATTACK_COLUMNS, markdown_table, write_checkpoint, write_curves, write_roc, write_rows

log = logging.getLogger(__name__)

RESULT_COLUMNS = ("strategy", "objective", "mode", "f1", "f1_std", "auc", "auc_std", "gap", "gap_std",
                  "classifier_score", "classifier_score_std", "outcome", "runs", "failed")
NA = "N/A"
CLASSIFIER_SEED = 7919


# -- data -------------------------------------------------------------------------------------
def make_dataset(config: ExperimentConfig, seed: int) -> Dataset:
    """Draw (or load) the dataset for one run and partition it."""
    stream = RngStream(seed, 1000)
    if config.dataset == "ring":
        ds = synth_gaussian_ring(GaussianRingConfig(config.ring_modes, 2.0, config.ring_std, config.samples),
                                 stream.child(0))
    elif config.dataset == "patterns":
        ds = synth_patterns(PatternConfig(config.image_size, 8, config.pattern_noise, config.samples),
                            stream.child(0))
    else:
        ds = load_image_folder(config.dataset.split(":", 1)[1], config.image_size)
    if config.n_train:
        return fixed_partition(ds, config.n_train)
    return split_train_holdout(ds, config.train_fraction, stream.child(1))


@lru_cache(maxsize=8)
def _score_classifier(dataset: str, ring_std: float, ring_modes: int, pattern_noise: float, image_size: int):
    """Fixed classifier for the classifier score, trained on its own labelled sample."""
    stream = RngStream(CLASSIFIER_SEED)
    if dataset == "ring":
        ds = synth_gaussian_ring(GaussianRingConfig(ring_modes, 2.0, ring_std, 2000), stream.child(0))
        n_classes = ring_modes
    elif dataset == "patterns":
        ds = synth_patterns(PatternConfig(image_size, 8, pattern_noise, 2000), stream.child(0))
        n_classes = 8
    else:
        return None
    x = ds.examples.reshape(len(ds), -1)
    return ScoreClassifier(x.shape[1], n_classes, seed=CLASSIFIER_SEED).fit(x, ds.labels, seed=CLASSIFIER_SEED)


def score_classifier_for(config: ExperimentConfig):
    return _score_classifier(config.dataset, config.ring_std, config.ring_modes, config.pattern_noise,
                             config.image_size)


# -- one run ----------------------------------------------------------------------------------
def train_config_for(config: ExperimentConfig, seed: int, epochs: int | None = None,
                     batch_size: int | None = None) -> TrainConfig:
    return TrainConfig(objective=config.objective, strategy=config.strategy,
                       batch_size=batch_size or config.batch_size,
                       epochs=config.epochs if epochs is None else epochs, seed=seed, d_steps=config.d_steps,
                       checkpoint_every=config.checkpoint_every, noise_kind=config.noise_kind,
                       noise_dim=config.noise_dim, d_hidden=config.d_hidden, g_hidden=config.g_hidden,
                       non_saturating=config.non_saturating)


def shadow_train_config(config: ExperimentConfig, seed: int, n_target_iterations: int, n_shadow: int) -> TrainConfig:
    """Shadow GAN: same architecture and strategy, the same number of iterations as the target."""
    batch = min(config.batch_size, n_shadow)
    steps = max(1, n_shadow // batch)
    return train_config_for(config, seed + 7_000_003, epochs=math.ceil(n_target_iterations / steps),
                            batch_size=batch)


@dataclass
class RunRecord:
    strategy: str
    objective: str
    seed: int
    outcome: str
    reason: str = ""
    gap: float = math.nan
    gap_signed: float = math.nan
    classifier_score: float = math.nan
    attacks: dict[str, AttackResult] = field(default_factory=dict)
    clip_max: float = math.nan
    iterations: int = 0

    @property
    def cell(self) -> str:
        return f"{self.strategy}_{self.objective}"

    def attack_rows(self) -> list[dict]:
        return [{"strategy": self.strategy, "objective": self.objective, "mode": mode, "f1": _fmt(res.f1),
                 "auc": _fmt(res.auc), "threshold": _fmt(res.threshold), "n_members": res.n_members,
                 "n_nonmembers": res.n_nonmembers, "seed": self.seed} for mode, res in sorted(self.attacks.items())]


def _fmt(v) -> str:
    return NA if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6f}"


def run_experiment(config: ExperimentConfig, seed: int, out_dir=None) -> RunRecord:
    """Train one model, attack it and measure it; training failure is an outcome, not an exception."""
    ds = make_dataset(config, seed)
    tr, ho = ds.train, ds.holdout
    tcfg = train_config_for(config, seed)
    result: TrainResult = train(tcfg, tr.examples, ho.examples)
    rec = RunRecord(config.strategy, config.objective, seed, result.outcome, result.reason,
                    iterations=result.iterations)
    if result.clip_audit:
        rec.clip_max = max(result.clip_audit)
    out = Path(out_dir) if out_dir is not None else None
    tag = f"{rec.cell}_s{seed}"
    if out is not None:
        run_dir = out / "runs" / tag
        run_dir.mkdir(parents=True, exist_ok=True)
        write_curves(run_dir / "curves.csv", result.curves)
        write_manifest(run_dir / "manifest.txt", ds)
        for ck in result.checkpoints[-1:]:
            write_checkpoint(run_dir / f"checkpoint_{ck.iteration}.txt", ck.iteration, {**ck.d_state, **ck.g_state})
    if result.failed:
        return rec

    final = result.curves[-1]
    gap = gap_from_losses(final["train_loss_d"], final["heldout_loss_d"])
    rec.gap, rec.gap_signed = gap.value, gap.signed
    clf = score_classifier_for(config)
    G = result.generator
    if clf is not None:
        rec.classifier_score = classifier_score(G.sample(config.score_samples, RngStream(seed, 2000).generator)
                                                .reshape(config.score_samples, -1), clf)
    testset = build_attack_testset(tr, ho, provenance=f"{config.dataset}:seed{seed}")
    if config.attack in ("whitebox", "both"):
        rec.attacks["whitebox"] = whitebox_attack(result.discriminator, testset, tr.examples)
    if config.attack in ("blackbox", "both"):
        shadow = ShadowConfig(config.aux_fraction)
        n_aux = int(round(config.aux_fraction * len(tr)))
        scfg = shadow_train_config(config, seed, result.iterations, 2 * n_aux)
        rec.attacks["blackbox"] = blackbox_attack(shadow, G.sample, testset, scfg, RngStream(seed, 3000).generator,
                                                  oracle_member_examples=tr.examples)
    if out is not None:
        save_grid(out / f"samples_{tag}.ppm", _as_images(G.sample(64, RngStream(seed, 4000).generator)))
        for mode, res in rec.attacks.items():
            write_roc(out / f"roc_{tag}_{mode}.csv", res.roc)
    return rec


def _as_images(samples: np.ndarray) -> np.ndarray:
    """Render vector samples (e.g. ring points) as small scatter images; images pass through."""
    if samples.ndim >= 3:
        return samples
    size = 32
    canvas = -np.ones((1, 1, size, size))
    pts = np.clip(((samples[:, :2] + 1.0) / 2.0 * (size - 1)).round().astype(int), 0, size - 1)
    canvas[0, 0, size - 1 - pts[:, 1], pts[:, 0]] = 1.0
    return canvas


# -- aggregation ------------------------------------------------------------------------------
def _mean_std(values) -> tuple[str, str]:
    v = np.asarray([x for x in values if x is not None and not math.isnan(x)], dtype=np.float64)
    if v.size == 0:
        return NA, NA
    return f"{v.mean():.6f}", f"{v.std():.6f}"


@dataclass
class ResultsTable:
    rows: list[dict]
    records: list[RunRecord]

    def attack_rows(self) -> list[dict]:
        rows = [r for rec in self.records for r in rec.attack_rows()]
        return sorted(rows, key=lambda r: (r["objective"], r["strategy"], r["mode"], r["seed"]))

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows(out / "results.csv", RESULT_COLUMNS, self.rows)
        (out / "results.md").write_text(markdown_table(RESULT_COLUMNS, self.rows))
        write_rows(out / "attacks.csv", ATTACK_COLUMNS, self.attack_rows())

    def cell(self, strategy: str, objective: str, mode: str = "whitebox") -> dict:
        for row in self.rows:
            if (row["strategy"], row["objective"], row["mode"]) == (strategy, objective, mode):
                return row
        raise KeyError((strategy, objective, mode))


def aggregate(records: list[RunRecord], modes: tuple[str, ...]) -> ResultsTable:
    """One row per (strategy, objective, mode); failed seeds are excluded and counted, all-failed cells are N/A."""
    cells: dict[tuple[str, str], list[RunRecord]] = {}
    for rec in records:
        cells.setdefault((rec.strategy, rec.objective), []).append(rec)
    rows = []
    for (strategy, objective), recs in sorted(cells.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        ok = [r for r in recs if r.outcome == "Converged"]
        failed = len(recs) - len(ok)
        for mode in modes:
            row = {"strategy": strategy, "objective": objective, "mode": mode, "runs": len(recs), "failed": failed}
            if not ok:
                row.update({c: NA for c in RESULT_COLUMNS if c not in row})
                row["outcome"] = "Failed"
            else:
                row["f1"], row["f1_std"] = _mean_std([r.attacks[mode].f1 for r in ok if mode in r.attacks])
                row["auc"], row["auc_std"] = _mean_std([r.attacks[mode].auc for r in ok if mode in r.attacks])
                row["gap"], row["gap_std"] = _mean_std([r.gap for r in ok])
                row["classifier_score"], row["classifier_score_std"] = _mean_std([r.classifier_score for r in ok])
                row["outcome"] = "Converged" if not failed else f"Partial ({len(ok)}/{len(recs)})"
            rows.append(row)
    return ResultsTable(rows, sorted(records, key=lambda r: (r.objective, r.strategy, r.seed)))


def _modes(config: ExperimentConfig) -> tuple[str, ...]:
    return ("whitebox", "blackbox") if config.attack == "both" else (config.attack,)


def _run_job(args) -> RunRecord:
    config, seed, out_dir = args
    try:
        return run_experiment(config, seed, out_dir)
    except (ValueError, FloatingPointError) as exc:  # isolate a broken cell from the rest of the grid
        log.warning("cell %s/%s seed %d aborted: %s", config.strategy, config.objective, seed, exc)
        return RunRecord(config.strategy, config.objective, seed, "Failed", f"error: {exc}")


def run_suite(config: ExperimentConfig, out_dir=None, workers: int | None = None) -> ResultsTable:
    """Every (strategy, objective) cell times every seed, optionally in parallel worker processes."""
    jobs = [(config.with_cell(s, o), seed, out_dir) for s, o in config.cells() for seed in config.seeds]
    workers = config.workers if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_job, jobs))
    else:
        records = [_run_job(j) for j in jobs]
    table = aggregate(records, _modes(config))
    if out_dir is not None:
        table.write(out_dir)
        (Path(out_dir) / "config.txt").write_text(config.to_text())
    return table


# -- audit ------------------------------------------------------------------------------------
@dataclass
class AuditReport:
    chains: list
    convergence: object | None = None

    @property
    def passed(self) -> bool:
        ok = all(c.passed is not False for c in self.chains)
        return ok and (self.convergence is None or self.convergence.passed)


def run_audit(config: AuditConfig, out_dir=None) -> AuditReport:
    chains = [verify_dp_chain(ChainConfig(config.mechanism, eps, config.m, config.n_hypotheses, config.p,
                                          config.n_runs, config.seed)) for eps in config.epsilons]
    conv = None
    if config.convergence:
        conv = verify_uniform_convergence(None, ConvergenceConfig(epsilon=config.convergence_epsilon,
                                                                  n_runs=config.convergence_runs, seed=config.seed))
    report = AuditReport(chains, conv)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_audit_csv(out / "audit.csv", chains)
        (out / "audit.txt").write_text(summarize(chains) + "\n")
        if conv is not None:
            write_convergence_csv(out / "convergence.csv", conv)
    return report


__all__ = ["NA", "RESULT_COLUMNS", "AuditReport", "ResultsTable", "RunRecord", "aggregate", "make_dataset",
           "run_audit", "run_experiment", "run_suite", "score_classifier_for", "shadow_train_config",
           "train_config_for"]
