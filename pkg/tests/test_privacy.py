import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ganleak.engine import as_generator
from ganleak.privacy import (ChainConfig, ConvergenceConfig, EpsAccountant, ExponentialMechanismLearner,
                             HypothesisClass, NoisyLogisticTrainer, clip_per_example, dp_stability_bound,
                             estimate_generalization_gap, estimate_ro_stability, exp_mechanism_probs,
                             exp_mechanism_select, generalization_bound, laplace_step_epsilon, mcdiarmid_tail,
                             verify_dp_chain, verify_uniform_convergence)
from ganleak.privacy.estimators import exact_ro_stability
from ganleak.privacy.mechanisms import (DataIndependentTrainer, MemorizingScorer, NonPrivateArgmaxLearner,
                                        PostProcessed, TwoPointDistribution)
from ganleak.privacy.verify import write_audit_csv
from oracles import exp_mechanism_by_hand, ro_stability_brute


# -- exponential mechanism ----------------------------------------------------------------
def test_exp_mechanism_worked_example():
    p = exp_mechanism_probs([1.0, 0.0, 0.0], 2.0, 1.0)
    e = math.e
    assert np.allclose(p, [e / (e + 2), 1 / (e + 2), 1 / (e + 2)], atol=1e-12)
    assert np.allclose(p, [0.576, 0.212, 0.212], atol=1e-3)


def test_equal_scores_and_zero_epsilon_are_uniform():
    assert np.allclose(exp_mechanism_probs([0.3, 0.3], 1.0, 1.0), [0.5, 0.5])
    assert np.allclose(exp_mechanism_probs([5.0, -2.0, 0.1, 9.0], 0.0, 1.0), 0.25)


@given(scores=st.lists(st.floats(-3, 3), min_size=1, max_size=8), eps=st.floats(0, 5),
       sens=st.floats(0.05, 2))
def test_exp_mechanism_matches_hand_softmax(scores, eps, sens):
    assert np.allclose(exp_mechanism_probs(scores, eps, sens), exp_mechanism_by_hand(scores, eps, sens), atol=1e-12)


def test_exp_mechanism_validation_and_select():
    with pytest.raises(ValueError):
        exp_mechanism_probs([1.0], -0.1, 1.0)
    with pytest.raises(ValueError):
        exp_mechanism_select([], lambda h, d: 0.0, None, 1.0, 1.0, 0)
    picks = [exp_mechanism_select("ab", lambda h, d: 100.0 * (h == "b"), None, 1.0, 1.0, s) for s in range(20)]
    assert set(picks) == {"b"}


def test_hypothesis_class_limits():
    with pytest.raises(ValueError):
        HypothesisClass(np.full((65, 2), 0.5))
    H = HypothesisClass.grid(8)
    assert len(H) == 8 and H.table.min() >= math.exp(-1) - 1e-15


# -- bounds ----------------------------------------------------------------------------------
@pytest.mark.parametrize("eps,expected", [(0.1, 0.1051709), (1.0, 1.7182818), (0.0, 0.0)])
def test_dp_stability_bound_values(eps, expected):
    assert dp_stability_bound(eps) == pytest.approx(expected, abs=1e-7)


def test_generalization_bound_composes():
    assert generalization_bound(0.1) == pytest.approx(0.1051709, abs=1e-7)
    with pytest.raises(ValueError):
        dp_stability_bound(-1.0)


def test_mcdiarmid_example_is_vacuous():
    tail = mcdiarmid_tail(0.5, 100, 0.1)
    assert tail.raw == pytest.approx(2 * math.exp(-0.5)) and tail.raw == pytest.approx(1.2131, abs=1e-4)
    assert tail.bound == 1.0 and tail.vacuous


@given(t=st.floats(0.01, 2), m=st.integers(1, 500), eps=st.floats(0.01, 1))
def test_mcdiarmid_is_decreasing_in_t_and_obeys_doubling(t, m, eps):
    a, b = mcdiarmid_tail(t, m, eps).raw, mcdiarmid_tail(2 * t, m, eps).raw
    assert b <= a
    # exp(-2(2t)^2 / c) = exp(-2t^2 / c)^4
    assert b == pytest.approx(2 * (a / 2) ** 4, rel=1e-9, abs=1e-300)


# -- clipped noisy gradients -------------------------------------------------------------------
def test_clip_example_and_mean():
    clipped, norms = clip_per_example([np.array([[10.0], [-10.0]])], 1.0)
    assert np.array_equal(clipped[0], [[1.0], [-1.0]])
    assert clipped[0].mean() == 0.0 and np.array_equal(norms, [10.0, 10.0])


def test_clip_uses_joint_norm():
    clipped, _ = clip_per_example([np.array([[3.0]]), np.array([[4.0]])], 1.0)
    assert clipped[0][0, 0] == pytest.approx(0.6) and clipped[1][0, 0] == pytest.approx(0.8)
    with pytest.raises(FloatingPointError):
        clip_per_example([np.array([[np.nan]])], 1.0)


def test_accountant_is_additive():
    acc = EpsAccountant()
    for e in (0.1, 0.2, 0.05):
        acc.spend(e)
    assert acc.total == pytest.approx(0.35)
    with pytest.raises(ValueError):
        acc.spend(-0.1)


def test_step_epsilon_scaling():
    e = laplace_step_epsilon(1.0, 10, 2.0, 4)
    assert e == pytest.approx(2 * 2 * 1.0 / (10 * 2.0))
    assert laplace_step_epsilon(1.0, 10, 4.0, 4) == pytest.approx(e / 2)
    assert laplace_step_epsilon(1.0, 10, math.inf, 4) == 0.0


def test_noisy_trainer_accounts_its_budget():
    tr = NoisyLogisticTrainer.for_total_epsilon(0.5, m=16, steps=20, checkpoint_every=10)
    assert tr.epsilon == pytest.approx(0.5)
    cks = tr.run(np.random.default_rng(0).normal(size=(16, 2)), 1)
    assert [k for k, _ in cks] == [0, 10, 20]
    assert tr.last_epsilon == pytest.approx(0.5)
    assert all(np.linalg.norm(theta) <= tr.radius + 1e-12 for _, theta in cks)


# -- stability and gap ---------------------------------------------------------------------------
@pytest.mark.parametrize("eps", [0.1, 0.5, 1.0])
def test_exact_stability_matches_brute_force_and_bound(eps):
    m = 5
    learner = ExponentialMechanismLearner(HypothesisClass.grid(4), eps, m)
    exact = exact_ro_stability(learner).value
    brute = ro_stability_brute(lambda S: learner.distribution(np.array(S)), learner.losses, m)
    assert exact == pytest.approx(brute, abs=1e-12)
    assert exact <= dp_stability_bound(eps)


def test_post_processing_does_not_increase_stability():
    base = ExponentialMechanismLearner(HypothesisClass.grid(4), 0.5, 6)
    kernel = np.full((4, 4), 0.1) + 0.6 * np.eye(4)
    post = PostProcessed(base, kernel, base.H)
    assert exact_ro_stability(post).value <= exact_ro_stability(base).value + 1e-15


def test_data_independent_trainer_has_zero_stability_and_gap():
    H = HypothesisClass.grid(4)
    tr = DataIndependentTrainer(np.log(H.table), 10)
    assert exact_ro_stability(tr).value == 0.0
    assert estimate_generalization_gap(tr, TwoPointDistribution(0.3), 10).value == pytest.approx(0.0, abs=1e-15)


def test_memorizing_scorer_generalizes_badly():
    class Uniform:
        def sample(self, n, rng):
            return as_generator(rng).uniform(-1, 1, (n, 2))

    gap = estimate_generalization_gap(MemorizingScorer(0.05), Uniform(), 20, n_runs=30, rng=0)
    assert gap.value > 0.5 and gap.value - gap.half_width > 0
    stab = estimate_ro_stability(MemorizingScorer(0.05), Uniform().sample(20, 1),
                                 probe_set=Uniform().sample(10, 2), n_runs=2, rng=0)
    assert stab.value > 0.5


def test_monte_carlo_stability_needs_replacements():
    with pytest.raises(ValueError):
        estimate_ro_stability(MemorizingScorer(), np.zeros((3, 2)), n_runs=2)


# -- end to end --------------------------------------------------------------------------------
@pytest.mark.parametrize("eps", [0.0, 0.1, 0.5, 1.0])
def test_dp_chain_holds(eps):
    rep = verify_dp_chain(ChainConfig(epsilon=eps))
    assert rep.passed
    assert rep.stability.value <= dp_stability_bound(eps) + 1e-12
    assert abs(rep.gap.value) <= rep.stability.value + 1e-12


def test_argmax_gets_no_verdict(tmp_path):
    rep = verify_dp_chain(ChainConfig(mechanism="argmax"))
    assert rep.passed is None and rep.row()["epsilon"] == "N/A" and rep.row()["pass"] == "N/A"
    assert isinstance(NonPrivateArgmaxLearner(HypothesisClass.grid(4), 5).distribution([0, 1, 1, 0, 0]), np.ndarray)
    write_audit_csv(tmp_path / "a.csv", [rep, verify_dp_chain(ChainConfig())])
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("mechanism,epsilon")


def test_small_uniform_convergence_run():
    cfg = ConvergenceConfig(epsilon=0.5, m=16, steps=20, checkpoint_every=10, n_runs=20, eval_factor=100)
    rep = verify_uniform_convergence(None, cfg)
    assert rep.passed and rep.bound_is_k_independent()
    assert sorted(rep.deviations) == [0, 10, 20]
    assert len(rep.rows) == 3 * len(cfg.t_grid)
    with pytest.raises(ValueError):
        verify_uniform_convergence(NoisyLogisticTrainer(m=8), cfg)
