from .bounds import TailBound, dp_stability_bound, gap_bound_from_stability, generalization_bound, mcdiarmid_tail
from .estimators import GapEstimate, StabilityEstimate, estimate_generalization_gap, estimate_ro_stability
from .mechanisms import (DpParams, EpsAccountant, ExponentialMechanismLearner, HypothesisClass,
                         NoisyLogisticTrainer, clip_per_example, exp_mechanism_probs, exp_mechanism_select,
                         laplace_step_epsilon, noisy_grad_step)
from .verify import ChainConfig, ConvergenceConfig, verify_dp_chain, verify_uniform_convergence

__all__ = ["ChainConfig", "ConvergenceConfig", "DpParams", "EpsAccountant", "ExponentialMechanismLearner",
           "GapEstimate", "HypothesisClass", "NoisyLogisticTrainer", "StabilityEstimate", "TailBound",
           "clip_per_example", "dp_stability_bound", "estimate_generalization_gap", "estimate_ro_stability",
           "exp_mechanism_probs", "exp_mechanism_select", "gap_bound_from_stability", "generalization_bound",
           "laplace_step_epsilon", "mcdiarmid_tail", "noisy_grad_step", "verify_dp_chain",
           "verify_uniform_convergence"]
