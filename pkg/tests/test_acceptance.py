"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line (collected again in
the terminal summary).  The experiment-level checks run the package
defaults for the desk-scale datasets; nothing here is tuned per criterion.
"""
import math
import time

import numpy as np
import pytest

from ganleak.cli import ExperimentConfig, run_experiment, run_suite
from ganleak.data import ScoreClassifier, classifier_score
from ganleak.data.metrics import classifier_score_from_probs
from ganleak.engine import grad
from ganleak.gan import Discriminator, MeasuringFunction, TrainConfig, discriminator_loss_terms, train
from ganleak.data import GaussianRingConfig, synth_gaussian_ring
from ganleak.lipschitz import gradient_penalty, new_power_state, power_iterate
from ganleak.membership import compute_auc, f1_at_mean_threshold, rank_auc
from ganleak.privacy import ChainConfig, ConvergenceConfig, dp_stability_bound, verify_dp_chain, verify_uniform_convergence
from oracles import all_pairs_auc, central_difference, confusion_f1, max_relative_error, sweep_auc, top_singular_value

SEEDS = tuple(range(5))
DATASETS = ("ring", "patterns")
STRATEGIES = ("original", "spectral", "clip")


# -- 1: gradients -------------------------------------------------------------------------------
def _random_network_error(seed: int) -> float:
    gen = np.random.default_rng(seed)
    in_dim = int(gen.integers(2, 5))
    hidden = tuple(int(w) for w in gen.integers(2, 7, size=int(gen.integers(1, 4))))
    critic = bool(seed % 2)
    D = Discriminator(in_dim, hidden, gen, use_sigmoid=not critic)
    for p in D.parameters():
        p.data = gen.normal(0.0, 0.5, p.shape)
    real, fake = gen.uniform(-1, 1, (4, in_dim)), gen.uniform(-1, 1, (4, in_dim))
    phi = MeasuringFunction.IDENTITY if critic else MeasuringFunction.LOG
    params = D.parameters()

    def loss():
        r, f = discriminator_loss_terms(D, real, fake, phi)
        return r + f - gradient_penalty(D, real, fake, 10.0, seed)

    analytic = [g.data for g in grad(loss(), params)]
    # h near the cube root of machine epsilon balances truncation against rounding in the loss
    numeric = central_difference(lambda: loss().item(), [p.data for p in params], h=1e-5)
    return max_relative_error(analytic, numeric)


def test_criterion_01_gradient_oracle(report_criterion):
    start = time.perf_counter()
    worst = max(_random_network_error(s) for s in range(50))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 60
    report_criterion(1, ok, f"50 networks with gradient penalty, max rel err {worst:.2e}, {elapsed:.1f}s")
    assert ok


# -- 2: spectral normalization ------------------------------------------------------------------
def test_criterion_02_spectral_oracle(report_criterion):
    gen = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        rows, cols = (int(v) for v in gen.integers(1, 33, size=2))
        W = gen.normal(size=(rows, cols))
        sigma = power_iterate(W, new_power_state(rows, gen), 500)
        exact = top_singular_value(W)
        worst = max(worst, abs(sigma - exact) / exact)
    ring = synth_gaussian_ring(GaussianRingConfig(std=0.2, samples=128), 0).examples[:64]
    sigmas = []
    for objective in ("js", "wasserstein"):
        res = train(TrainConfig(objective=objective, strategy="spectral", epochs=400, checkpoint_every=50), ring)
        sigmas += [top_singular_value(W) for ck in res.checkpoints for W in ck.effective_weights]
    ok = worst <= 0.01 and all(0.99 <= s <= 1.01 for s in sigmas)
    report_criterion(2, ok, f"power iteration max rel err {worst:.2e}; {len(sigmas)} checkpoint matrices, "
                            f"sigma in [{min(sigmas):.6f}, {max(sigmas):.6f}]")
    assert ok


# -- 3: clipping ----------------------------------------------------------------------------------
def test_criterion_03_clipping_invariant(report_criterion):
    ring = synth_gaussian_ring(GaussianRingConfig(std=0.2, samples=128), 1).examples[:64]
    res = train(TrainConfig(strategy="clip", epochs=300), ring)
    audit = res.clip_audit
    ok = len(audit) == res.iterations > 0 and max(audit) <= 0.01
    report_criterion(3, ok, f"{len(audit)} discriminator steps, max|w| = {max(audit):.6g}")
    assert ok


# -- 4: AUC -------------------------------------------------------------------------------------
def test_criterion_04_auc_oracle(report_criterion):
    gen = np.random.default_rng(4)
    worst, invariant = 0.0, True
    transforms = (np.exp, np.tanh, lambda s: 3.0 * s + 1.0, lambda s: s ** 3)
    for i in range(1000):
        n = int(gen.integers(2, 60))
        scores = gen.integers(0, 5, n).astype(float) if i % 3 == 0 else gen.normal(size=n)
        labels = gen.integers(0, 2, n)
        labels[:2] = [0, 1]
        auc, _ = compute_auc(scores, labels)
        worst = max(worst, abs(sweep_auc(scores, labels) - all_pairs_auc(scores, labels)),
                    abs(auc - all_pairs_auc(scores, labels)))
        base = rank_auc(scores, labels)
        invariant &= all(rank_auc(f(scores), labels) == base for f in transforms)
    ok = worst <= 1e-9 and invariant
    report_criterion(4, ok, f"1000 sets, max |sweep - all-pairs| {worst:.1e}, monotone invariance {invariant}")
    assert ok


# -- 5: F1 ----------------------------------------------------------------------------------------
def test_criterion_05_f1_worked_example(report_criterion):
    scores, labels = [0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]
    res = f1_at_mean_threshold([0.9, 0.8], scores, labels)
    ok = (math.isclose(res.threshold, 0.85, abs_tol=1e-12) and math.isclose(res.f1, 2 / 3, abs_tol=1e-12)
          and math.isclose(confusion_f1(scores, labels, 0.85), 2 / 3, abs_tol=1e-12))
    report_criterion(5, ok, f"t = {res.threshold:.4f}, F1 = {res.f1:.6f}")
    assert ok


# -- 6: privacy chain ---------------------------------------------------------------------------
def test_criterion_06_dp_chain(report_criterion):
    start = time.perf_counter()
    reps = [verify_dp_chain(ChainConfig(epsilon=eps, n_hypotheses=8)) for eps in (0.1, 0.5, 1.0)]
    elapsed = time.perf_counter() - start
    ok = all(r.passed for r in reps) and elapsed < 300
    for r in reps:
        ok &= r.stability.value <= dp_stability_bound(r.epsilon) + r.stability.half_width
        ok &= abs(r.gap.value) <= r.stability.value + r.stability.half_width + r.gap.half_width
    detail = "; ".join(f"eps {r.epsilon:g}: stability {r.stability.value:.4f} <= {r.stability_bound:.4f}, "
                       f"|gap| {abs(r.gap.value):.4f}" for r in reps)
    report_criterion(6, ok, f"{detail}; {elapsed:.1f}s")
    assert ok


# -- 7: uniform convergence ------------------------------------------------------------------------
def test_criterion_07_mcdiarmid(report_criterion):
    start = time.perf_counter()
    cfg = ConvergenceConfig(n_runs=200)
    rep = verify_uniform_convergence(None, cfg)
    elapsed = time.perf_counter() - start
    worst = max(rep.rows, key=lambda r: r.exceed_freq - r.bound)
    ok = rep.passed and len(cfg.t_grid) == 5 and rep.n_runs >= 200 and elapsed < 900
    report_criterion(7, ok, f"{rep.n_runs} runs, eps {rep.epsilon:g}, {len({r.iteration for r in rep.rows})} "
                            f"checkpoints x {len(cfg.t_grid)} t; tightest: k={worst.iteration} t={worst.t} "
                            f"freq {worst.exceed_freq:.3f} vs bound {worst.bound:.3f}; {elapsed:.0f}s")
    assert ok


# -- 8 and 9: desk-scale experiments -------------------------------------------------------------
@pytest.fixture(scope="module")
def desk_runs():
    """Package defaults on both datasets, every strategy, five seeds; black-box shadows where needed."""
    start = time.perf_counter()
    records = {}
    for dataset in DATASETS:
        for strategy in STRATEGIES:
            attack = "whitebox" if strategy == "clip" else "both"
            cfg = ExperimentConfig(dataset=dataset, strategy=strategy, attack=attack, seeds=SEEDS)
            records[dataset, strategy] = [run_experiment(cfg, seed) for seed in SEEDS]
    return records, time.perf_counter() - start


def _mean(records, what):
    return float(np.mean([what(r) for r in records]))


def test_criterion_08_regularization_reduces_leakage(desk_runs, report_criterion):
    records, elapsed = desk_runs
    ok = elapsed < 1800
    lines = []
    for dataset in DATASETS:
        recs = {s: records[dataset, s] for s in STRATEGIES}
        converged = all(r.outcome == "Converged" for rs in recs.values() for r in rs)
        auc = {s: _mean(rs, lambda r: r.attacks["whitebox"].auc) if converged else math.nan
               for s, rs in recs.items()}
        gap = {s: _mean(rs, lambda r: r.gap) if converged else math.nan for s, rs in recs.items()}
        a = auc["original"] > 0.55
        b = all(0.45 <= auc[s] <= 0.55 for s in ("spectral", "clip"))
        c = all(gap["original"] > gap[s] for s in ("spectral", "clip"))
        ok &= converged and a and b and c
        lines.append(f"{dataset}: AUC " + ", ".join(f"{s} {auc[s]:.3f}" for s in STRATEGIES)
                     + " | gap " + ", ".join(f"{s} {gap[s]:.4f}" for s in STRATEGIES)
                     + f" | (a) {a} (b) {b} (c) {c}")
    report_criterion(8, ok, "; ".join(lines) + f"; {elapsed / 60:.1f} min")
    assert ok, "\n".join(lines)


def test_criterion_09_blackbox_is_weaker(desk_runs, report_criterion):
    records, _ = desk_runs
    ok = True
    lines = []
    for dataset in DATASETS:
        plain, spectral = records[dataset, "original"], records[dataset, "spectral"]
        if not all(r.outcome == "Converged" for r in plain + spectral):
            ok = False
            lines.append(f"{dataset}: a run failed to converge")
            continue
        wb = _mean(plain, lambda r: r.attacks["whitebox"].auc)
        bb = _mean(plain, lambda r: r.attacks["blackbox"].auc)
        bb_sn = _mean(spectral, lambda r: r.attacks["blackbox"].auc)
        ok &= bb <= wb and bb_sn <= bb
        lines.append(f"{dataset}: plain black-box {bb:.3f} <= white-box {wb:.3f} ({bb <= wb}); "
                     f"spectral black-box {bb_sn:.3f} <= plain black-box {bb:.3f} ({bb_sn <= bb})")
    report_criterion(9, ok, "; ".join(lines))
    assert ok, "\n".join(lines)


# -- 10: classifier score ---------------------------------------------------------------------------
def test_criterion_10_classifier_score_bounds(report_criterion):
    gen = np.random.default_rng(10)
    worst_exact, in_bounds = 0.0, True
    for C in range(2, 11):
        worst_exact = max(worst_exact, abs(classifier_score_from_probs(np.full((50, C), 1.0 / C)) - 1.0),
                          abs(classifier_score_from_probs(np.eye(C)[np.arange(10 * C) % C]) - C))
        for _ in range(20):
            probs = gen.dirichlet(np.full(C, gen.uniform(0.05, 5.0)), size=int(gen.integers(1, 40)))
            s = classifier_score_from_probs(probs)
            in_bounds &= 1.0 - 1e-12 <= s <= C + 1e-12
    clf = ScoreClassifier(4, 3, seed=0).fit(gen.normal(size=(60, 4)), gen.integers(0, 3, 60), steps=50)
    for scale in (0.0, 1.0, 1e3):
        s = classifier_score(gen.normal(size=(30, 4)) * scale, clf)
        in_bounds &= 1.0 - 1e-12 <= s <= 3.0 + 1e-12
    ok = in_bounds and worst_exact <= 1e-9
    report_criterion(10, ok, f"bounds hold {in_bounds}, closed forms max err {worst_exact:.1e}")
    assert ok


# -- 11: determinism ------------------------------------------------------------------------------
def test_criterion_11_suite_determinism(tmp_path, report_criterion):
    cfg = ExperimentConfig(strategies=STRATEGIES, objectives=("js", "wasserstein"), attack="both", seeds=(0, 1),
                           epochs=40, samples=64, batch_size=16, d_hidden=(16,), g_hidden=(16,), noise_dim=8,
                           score_samples=50)
    run_suite(cfg, tmp_path / "first")
    run_suite(cfg, tmp_path / "second")
    same = all((tmp_path / "first" / f).read_text() == (tmp_path / "second" / f).read_text()
               for f in ("results.csv", "attacks.csv"))
    rows = (tmp_path / "first" / "results.csv").read_text().count("\n") - 1
    report_criterion(11, same, f"two suite runs, {rows} result rows, results.csv identical: {same}")
    assert same
