import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ganleak.data import Dataset
from ganleak.gan import Discriminator, Generator, NoisePrior, TrainConfig
from ganleak.membership import (AttackModel, AttackTestSet, MinMaxRescaler, ShadowConfig, attack_decide,
                                blackbox_attack, build_attack_testset, compute_auc, evaluate_scores,
                                f1_at_mean_threshold, f1_at_threshold, rank_auc, roc_curve, split_auxiliary,
                                trapezoid_area, whitebox_attack, whitebox_score)
from oracles import all_pairs_auc, confusion_f1, sweep_auc


@pytest.mark.parametrize("score,t,expected", [(0.9, 0.5, 1), (0.5, 0.5, 1), (0.1, 0.5, 0)])
def test_attack_decide(score, t, expected):
    assert attack_decide(score, t) == expected


def test_f1_worked_example():
    scores = [0.9, 0.8, 0.1, 0.2]
    labels = [1, 1, 0, 0]
    res = f1_at_mean_threshold([0.9, 0.8], scores, labels)
    assert res.threshold == pytest.approx(0.85)
    assert (res.precision, res.recall) == (1.0, 0.5)
    assert res.f1 == pytest.approx(2 / 3)
    assert res.f1 == pytest.approx(confusion_f1(scores, labels, 0.85))


def test_f1_perfect_separation():
    assert f1_at_threshold([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0], 0.5).f1 == 1.0


@pytest.mark.parametrize("n_pos,n_neg", [(2, 2), (3, 7), (5, 1)])
def test_f1_identical_scores(n_pos, n_neg):
    scores = np.full(n_pos + n_neg, 0.4)
    labels = [1] * n_pos + [0] * n_neg
    p = n_pos / (n_pos + n_neg)
    res = f1_at_mean_threshold(scores[:n_pos], scores, labels)
    assert res.f1 == pytest.approx(2 * p / (p + 1))


def test_f1_degenerate_flag():
    res = f1_at_threshold([0.1, 0.2, 0.3], [1, 0, 1], 0.9)
    assert res.f1 == 0.0 and res.degenerate
    with pytest.raises(ValueError):
        f1_at_mean_threshold([], [0.1], [1])


def test_auc_examples():
    assert rank_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    swapped = [0.9, 0.8, 0.2, 0.1]
    labels = [0, 1, 1, 0]
    assert rank_auc(swapped, labels) == pytest.approx(all_pairs_auc(swapped, labels))
    assert rank_auc(swapped, labels) == 0.5
    with pytest.raises(ValueError):
        rank_auc([0.1, 0.2], [1, 1])


@given(seed=st.integers(0, 100_000), n=st.integers(2, 40), ties=st.booleans())
def test_auc_equals_all_pairs_and_sweep(seed, n, ties):
    gen = np.random.default_rng(seed)
    scores = gen.integers(0, 4, n).astype(float) if ties else gen.random(n)
    labels = gen.integers(0, 2, n)
    labels[0], labels[1] = 1, 0
    auc, roc = compute_auc(scores, labels)
    assert auc == pytest.approx(all_pairs_auc(scores, labels), abs=1e-9)
    assert trapezoid_area(roc) == pytest.approx(auc, abs=1e-9)
    assert trapezoid_area(roc) == pytest.approx(sweep_auc(scores, labels), abs=1e-9)


@given(seed=st.integers(0, 100_000))
def test_auc_monotone_invariance(seed):
    gen = np.random.default_rng(seed)
    scores = gen.normal(size=30)
    labels = gen.integers(0, 2, 30)
    labels[:2] = [0, 1]
    base = rank_auc(scores, labels)
    for f in (np.exp, lambda s: 3 * s + 1, lambda s: s ** 3, lambda s: 1 / (1 + np.exp(-s))):
        assert rank_auc(f(scores), labels) == base


def test_roc_endpoints():
    roc = roc_curve([0.3, 0.3, 0.7, 0.1], [1, 0, 1, 0])
    assert tuple(roc[0]) == (0.0, 0.0) and tuple(roc[-1]) == (1.0, 1.0)
    assert np.all(np.diff(roc[:, 0]) >= 0) and np.all(np.diff(roc[:, 1]) >= 0)


def test_constant_discriminator_is_uninformative(rng):
    D = Discriminator(2, (4,), rng)
    for p in D.parameters():
        p.data = np.zeros_like(p.data)
    ts = AttackTestSet(rng.normal(size=(10, 2)), [1] * 5 + [0] * 5)
    res = whitebox_attack(D, ts, ts.examples[:5])
    assert res.auc == 0.5
    assert np.all(whitebox_score(D, ts.examples) == 0.5)


def test_whitebox_score_bound():
    class Half:
        output_bound = 0.5

        def score(self, x):
            return np.full(len(x), 0.5)

    assert np.all(whitebox_score(Half(), np.zeros((3, 2))) == 1.0)
    with pytest.raises(ValueError):
        whitebox_score(Half(), np.zeros((3, 2)), b=0.25)


def test_unbounded_critic_is_rescaled(rng):
    D = Discriminator(2, (4,), rng, use_sigmoid=False)
    for p in D.parameters():
        p.data = rng.normal(0, 3, p.shape)
    ts = AttackTestSet(rng.normal(size=(20, 2)), [1] * 10 + [0] * 10)
    res = whitebox_attack(D, ts, ts.examples[:10])
    assert res.rescaled
    raw = D.score(ts.examples)
    assert res.auc == rank_auc(raw, ts.labels)


def test_min_max_rescaler():
    r = MinMaxRescaler.fit([2.0, 4.0])
    assert np.allclose(r([2.0, 3.0, 4.0, 5.0]), [0.0, 0.5, 1.0, 1.0])
    assert np.all(MinMaxRescaler(1.0, 1.0)([0.0, 7.0]) == 0.5)


def test_build_testset_balance_and_overlap():
    ds = Dataset(np.linspace(-1, 1, 20).reshape(10, 2))
    tr, ho = ds.subset(np.arange(5)), ds.subset(np.arange(5, 10))
    ts = build_attack_testset(tr, ho)
    assert ts.balance == 0.5 and ts.n_members == 5
    with pytest.raises(ValueError, match="share"):
        build_attack_testset(tr, ds.subset([4, 5, 6]))
    with pytest.raises(ValueError):
        build_attack_testset(tr, ds.subset([]))
    with pytest.raises(ValueError, match="share"):
        build_attack_testset(tr.examples, tr.examples[:2])


def test_attack_model_validation():
    with pytest.raises(ValueError):
        AttackModel(threshold=1.0)
    with pytest.raises(ValueError):
        ShadowConfig(aux_fraction=0.0)


def test_auxiliary_split_fractions():
    ts = AttackTestSet(np.arange(40, dtype=float).reshape(20, 2), [1] * 10 + [0] * 10)
    split = split_auxiliary(ts, 0.3, 0)
    assert len(split.aux_members) == 3 and len(split.aux_nonmembers) == 3
    assert split.eval_set.n_members == 7 and split.eval_set.n_nonmembers == 7
    aux_rows = {r.tobytes() for r in np.concatenate([split.aux_members, split.aux_nonmembers])}
    assert not any(r.tobytes() in aux_rows for r in split.eval_set.examples)


def test_evaluate_scores_reports_attacker_threshold():
    res = evaluate_scores([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0], [0.9, 0.8], attacker_member_scores=[0.15])
    assert res.threshold == pytest.approx(0.85) and res.threshold_attacker == pytest.approx(0.15)
    # t = 0.15 admits 0.2: P = 2/3, R = 1
    assert res.f1_attacker == pytest.approx(0.8)


def test_untrained_shadow_is_uninformative():
    gen = np.random.default_rng(0)
    ts = AttackTestSet(gen.uniform(-1, 1, (200, 2)), [1] * 100 + [0] * 100)
    G = Generator(NoisePrior("normal", 4), (2,), (8,), gen)
    cfg = TrainConfig(epochs=0, batch_size=16, d_hidden=(8,), g_hidden=(8,), noise_dim=4)
    res = blackbox_attack(ShadowConfig(0.3), G.sample, ts, cfg, 1)
    assert res.mode == "blackbox"
    assert abs(res.auc - 0.5) < 0.15


def test_shadow_needs_enough_auxiliary_data():
    ts = AttackTestSet(np.random.default_rng(0).uniform(-1, 1, (20, 2)), [1] * 10 + [0] * 10)
    G = Generator(NoisePrior("normal", 4), (2,), (8,), np.random.default_rng(1))
    with pytest.raises(ValueError, match="smaller than the shadow batch"):
        blackbox_attack(ShadowConfig(0.3), G.sample, ts, TrainConfig(batch_size=64), 0)
