"""Membership-inference attacks on a trained discriminator.

The attacker thresholds the normalised discriminator output d(x)/b: an
example with score >= t is declared a training member.  White-box attacks
use the target discriminator directly; the black-box attack trains a shadow
("fake") discriminator from auxiliary data and generator samples only and
then runs the same white-box procedure with it.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .engine import RngStream, as_generator

MEMBER, NONMEMBER = 1, 0


@dataclass
class AttackTestSet:
    examples: np.ndarray
    labels: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if len(self.examples) != len(self.labels):
            raise ValueError("one label per example is required")
        if not (np.any(self.labels == MEMBER) and np.any(self.labels == NONMEMBER)):
            raise ValueError("attack test set needs both members and nonmembers")

    @property
    def n_members(self) -> int:
        return int(np.sum(self.labels == MEMBER))

    @property
    def n_nonmembers(self) -> int:
        return int(np.sum(self.labels == NONMEMBER))

    @property
    def balance(self) -> float:
        return self.n_members / len(self.labels)

    def subset(self, idx) -> "AttackTestSet":
        idx = np.asarray(idx, dtype=int)
        return AttackTestSet(self.examples[idx], self.labels[idx], self.provenance)


@dataclass
class AttackModel:
    bound: float = 1.0
    threshold: float = 0.5
    source: str = "target"

    def __post_init__(self):
        if self.bound <= 0:
            raise ValueError("bound must be positive")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")


@dataclass
class AttackResult:
    f1: float
    auc: float
    roc: np.ndarray
    threshold: float
    f1_degenerate: bool = False
    precision: float = 0.0
    recall: float = 0.0
    member_summary: dict = field(default_factory=dict)
    nonmember_summary: dict = field(default_factory=dict)
    n_members: int = 0
    n_nonmembers: int = 0
    mode: str = "whitebox"
    f1_attacker: float | None = None
    threshold_attacker: float | None = None
    rescaled: bool = False


@dataclass(frozen=True)
class ShadowConfig:
    aux_fraction: float = 0.3
    generator_samples: int | None = None

    def __post_init__(self):
        if not 0.0 < self.aux_fraction < 1.0:
            raise ValueError("aux_fraction must lie strictly between 0 and 1")


# -- scoring ------------------------------------------------------------------------
@dataclass
class MinMaxRescaler:
    """Monotone map of unbounded critic outputs onto [0, 1]."""

    lo: float
    hi: float

    @classmethod
    def fit(cls, scores) -> "MinMaxRescaler":
        scores = np.asarray(scores, dtype=np.float64)
        return cls(float(scores.min()), float(scores.max()))

    def __call__(self, scores) -> np.ndarray:
        scores = np.asarray(scores, dtype=np.float64)
        if self.hi == self.lo:
            return np.full_like(scores, 0.5)
        return np.clip((scores - self.lo) / (self.hi - self.lo), 0.0, 1.0)


def whitebox_score(D, x, b: float | None = None, rescaler: MinMaxRescaler | None = None) -> np.ndarray:
    """d(x)/b, optionally passed through a fitted rescaler for unbounded critics."""
    b = D.output_bound if b is None else b
    if b <= 0:
        raise ValueError("bound must be positive")
    raw = D.score(np.asarray(x).reshape(len(x), -1)) / b
    scores = rescaler(raw) if rescaler is not None else raw
    if np.any(scores < 0) or np.any(scores > 1):
        raise ValueError("attack scores fall outside [0, 1]; an unbounded critic needs a rescaler")
    return scores


def attack_decide(score, t: float):
    """1 (member) iff score >= t."""
    out = (np.asarray(score) >= t).astype(int)
    return int(out) if out.ndim == 0 else out


# -- evaluation ----------------------------------------------------------------------
@dataclass
class F1Result:
    f1: float
    threshold: float
    precision: float
    recall: float
    degenerate: bool


def f1_at_threshold(scores, labels, t: float) -> F1Result:
    scores, labels = np.asarray(scores, dtype=np.float64), np.asarray(labels, dtype=int)
    pred = attack_decide(scores, t)
    tp = int(np.sum((pred == 1) & (labels == MEMBER)))
    fp = int(np.sum((pred == 1) & (labels == NONMEMBER)))
    fn = int(np.sum((pred == 0) & (labels == MEMBER)))
    if tp == 0:
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        return F1Result(0.0, t, precision, recall, True)
    precision, recall = tp / (tp + fp), tp / (tp + fn)
    return F1Result(2 * precision * recall / (precision + recall), t, precision, recall, False)


def f1_at_mean_threshold(member_scores_on_train, scores, labels) -> F1Result:
    """F1 with the threshold set to the mean member score on the training set."""
    member_scores_on_train = np.asarray(member_scores_on_train, dtype=np.float64)
    if member_scores_on_train.size == 0:
        raise ValueError("need at least one member score to set the threshold")
    # the clip only undoes rounding: a float mean can land just above identical inputs
    t = float(np.clip(math.fsum(member_scores_on_train) / member_scores_on_train.size,
                      member_scores_on_train.min(), member_scores_on_train.max()))
    return f1_at_threshold(scores, labels, t)


def rank_auc(scores, labels) -> float:
    """P(member score > nonmember score) + 0.5 P(tie), via midranks."""
    scores, labels = np.asarray(scores, dtype=np.float64), np.asarray(labels, dtype=int)
    pos = labels == MEMBER
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_curve(scores, labels) -> np.ndarray:
    """(fpr, tpr) points from a sweep over distinct scores, highest first."""
    scores, labels = np.asarray(scores, dtype=np.float64), np.asarray(labels, dtype=int)
    pos = labels == MEMBER
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes")
    order = np.argsort(-scores, kind="mergesort")
    s, p = scores[order], pos[order]
    tps, fps = np.cumsum(p), np.cumsum(~p)
    last_of_group = np.r_[s[1:] != s[:-1], True]
    tpr = np.r_[0.0, tps[last_of_group] / n_pos]
    fpr = np.r_[0.0, fps[last_of_group] / n_neg]
    return np.stack([fpr, tpr], axis=1)


def trapezoid_area(roc: np.ndarray) -> float:
    fpr, tpr = roc[:, 0], roc[:, 1]
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def compute_auc(scores, labels) -> tuple[float, np.ndarray]:
    return rank_auc(scores, labels), roc_curve(scores, labels)


def _summary(x: np.ndarray) -> dict:
    return {"mean": float(np.mean(x)), "std": float(np.std(x)), "min": float(np.min(x)), "max": float(np.max(x))}


def evaluate_scores(scores, labels, member_scores_on_train, mode: str = "whitebox",
                    attacker_member_scores=None, rescaled: bool = False) -> AttackResult:
    scores, labels = np.asarray(scores, dtype=np.float64), np.asarray(labels, dtype=int)
    auc, roc = compute_auc(scores, labels)
    f1 = f1_at_mean_threshold(member_scores_on_train, scores, labels)
    res = AttackResult(f1.f1, auc, roc, f1.threshold, f1.degenerate, f1.precision, f1.recall,
                       _summary(scores[labels == MEMBER]), _summary(scores[labels == NONMEMBER]),
                       int(np.sum(labels == MEMBER)), int(np.sum(labels == NONMEMBER)), mode, rescaled=rescaled)
    if attacker_member_scores is not None and len(attacker_member_scores):
        fa = f1_at_mean_threshold(attacker_member_scores, scores, labels)
        res.f1_attacker, res.threshold_attacker = fa.f1, fa.threshold
    return res


# -- attack test sets ------------------------------------------------------------------
def build_attack_testset(train_split, holdout_split, provenance: str = "") -> AttackTestSet:
    """Mix the training split (members) with the held-out split (nonmembers).

    Splits may be ``Dataset`` objects (overlap checked by example id) or
    plain arrays (overlap checked by exact row equality).
    """
    tr_x, tr_ids = _examples_and_ids(train_split)
    ho_x, ho_ids = _examples_and_ids(holdout_split)
    if len(ho_x) == 0 or len(tr_x) == 0:
        raise ValueError("both the training and the held-out split must be non-empty")
    if tr_ids is not None and ho_ids is not None:
        overlap = np.intersect1d(tr_ids, ho_ids).size
    else:
        keys = {r.tobytes() for r in np.ascontiguousarray(tr_x.reshape(len(tr_x), -1))}
        overlap = sum(r.tobytes() in keys for r in np.ascontiguousarray(ho_x.reshape(len(ho_x), -1)))
    if overlap:
        raise ValueError(f"training and held-out splits share {overlap} example(s)")
    labels = np.r_[np.full(len(tr_x), MEMBER), np.full(len(ho_x), NONMEMBER)]
    return AttackTestSet(np.concatenate([tr_x, ho_x]), labels, provenance)


def _examples_and_ids(split):
    if hasattr(split, "examples"):
        return np.asarray(split.examples), np.asarray(split.ids)
    return np.asarray(split), None


def whitebox_attack(D, testset: AttackTestSet, member_examples, b: float | None = None) -> AttackResult:
    """Score the attack test set with the target discriminator.

    Unbounded (Wasserstein) critics are min-max rescaled over the test-set
    scores first; AUC is unaffected, F1 depends on that convention.
    """
    b = D.output_bound if b is None else b
    rescaler = None
    if not D.bound_verified:
        rescaler = MinMaxRescaler.fit(D.score(testset.examples.reshape(len(testset.examples), -1)) / b)
    scores = whitebox_score(D, testset.examples, b, rescaler)
    member_scores = whitebox_score(D, member_examples, b, rescaler)
    return evaluate_scores(scores, testset.labels, member_scores, "whitebox", rescaled=rescaler is not None)


# -- black-box attack -------------------------------------------------------------------------
@dataclass
class AuxiliarySplit:
    aux_members: np.ndarray
    aux_nonmembers: np.ndarray
    eval_set: AttackTestSet
    eval_members: np.ndarray


def split_auxiliary(testset: AttackTestSet, fraction: float, rng) -> AuxiliarySplit:
    """Give the attacker ``fraction`` of the members and of the nonmembers."""
    gen = as_generator(rng)
    aux_idx, rest_idx = [], []
    for label in (MEMBER, NONMEMBER):
        idx = np.flatnonzero(testset.labels == label)
        idx = idx[gen.permutation(len(idx))]
        k = int(round(fraction * len(idx)))
        aux_idx.append(np.sort(idx[:k]))
        rest_idx.append(idx[k:])
    rest = np.sort(np.concatenate(rest_idx))
    eval_set = testset.subset(rest)
    return AuxiliarySplit(testset.examples[aux_idx[0]], testset.examples[aux_idx[1]], eval_set,
                          eval_set.examples[eval_set.labels == MEMBER])


def train_shadow(aux_members: np.ndarray, sample_target, shadow_train_config, shadow: ShadowConfig):
    """Fit the shadow GAN on auxiliary members plus samples from the target generator.

    ``sample_target(n, rng)`` is the only view of the target model.  Returns
    the shadow ``TrainResult``.
    """
    from .gan.training import train

    n_gen = shadow.generator_samples if shadow.generator_samples is not None else len(aux_members)
    rng = RngStream(shadow_train_config.seed, 99)
    parts = [np.asarray(aux_members, dtype=np.float64)]
    if n_gen:
        parts.append(np.asarray(sample_target(n_gen, rng.generator), dtype=np.float64).reshape(n_gen, *parts[0].shape[1:]))
    real = np.concatenate(parts)
    if len(real) < shadow_train_config.batch_size:
        raise ValueError(f"auxiliary data ({len(real)} examples) is smaller than the shadow batch size "
                         f"{shadow_train_config.batch_size}")
    return train(shadow_train_config, real)


def blackbox_attack(shadow: ShadowConfig, sample_target, testset: AttackTestSet, shadow_train_config,
                    rng, oracle_member_examples=None) -> AttackResult:
    """Black-box attack with a shadow discriminator.

    The attacker holds ``aux_fraction`` of both the members and nonmembers of
    ``testset`` and can draw samples from the target generator.  The shadow
    discriminator then stands in for the target in the white-box procedure,
    evaluated on the non-auxiliary remainder.  The F1 threshold uses the
    attacker's own estimate (mean shadow score over auxiliary members);
    ``oracle_member_examples`` additionally gives the threshold from the full
    training set, as in the white-box setting.
    """
    split = split_auxiliary(testset, shadow.aux_fraction, rng)
    result = train_shadow(split.aux_members, sample_target, shadow_train_config, shadow)
    if result.failed:
        warnings.warn(f"shadow training failed: {result.reason}", RuntimeWarning, stacklevel=2)
    D = result.discriminator
    rescaler = None
    if not D.bound_verified:
        rescaler = MinMaxRescaler.fit(D.score(split.eval_set.examples.reshape(len(split.eval_set.examples), -1)))
    scores = whitebox_score(D, split.eval_set.examples, rescaler=rescaler)
    attacker_members = whitebox_score(D, split.aux_members, rescaler=rescaler)
    oracle = (whitebox_score(D, oracle_member_examples, rescaler=rescaler)
              if oracle_member_examples is not None else attacker_members)
    res = evaluate_scores(scores, split.eval_set.labels, oracle, "blackbox", attacker_members,
                          rescaled=rescaler is not None)
    return res
