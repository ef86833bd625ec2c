"""Alternating discriminator / generator training."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .. import lipschitz
from ..engine import Adam, NonFiniteError, NonFiniteGradient, RngStream, grad, no_grad
from ..lipschitz import RegularizerSpec
from .losses import MeasuringFunction, discriminator_loss_terms, generator_loss_empirical
from .models import Discriminator, Generator, NoisePrior

log = logging.getLogger(__name__)

# (learning rate, beta1, beta2) per objective and strategy
ADAM_TABLE = {
    ("js", "original"): (4e-4, 0.5, 0.999),
    ("js", "clip"): (4e-4, 0.5, 0.999),
    ("js", "spectral"): (4e-4, 0.0, 0.999),
    ("js", "gp"): (4e-4, 0.0, 0.999),
    ("wasserstein", "original"): (2e-4, 0.5, 0.999),
    ("wasserstein", "clip"): (2e-4, 0.5, 0.999),
    ("wasserstein", "spectral"): (2e-4, 0.0, 0.999),
    ("wasserstein", "gp"): (2e-4, 0.0, 0.999),
}
# strategies outside the tuned grid borrow the row of their closest relative
_ADAM_FALLBACK = {"weightnorm": "original", "orthonormal": "spectral"}

CONVERGED = "Converged"
FAILED = "Failed"


def adam_defaults(objective: str, strategy: str) -> tuple[float, float, float]:
    key = (objective, _ADAM_FALLBACK.get(strategy, strategy))
    if key not in ADAM_TABLE:
        raise ValueError(f"no optimizer defaults for objective={objective!r}, strategy={strategy!r}")
    return ADAM_TABLE[key]


@dataclass(frozen=True)
class TrainConfig:
    objective: str = "js"
    strategy: str = "original"
    batch_size: int = 64
    epochs: int = 1
    lr: float | None = None
    beta1: float | None = None
    beta2: float | None = None
    seed: int = 0
    d_steps: int = 1
    checkpoint_every: int = 0
    noise_kind: str = "normal"
    noise_dim: int = 64
    d_hidden: tuple[int, ...] = (128, 128)
    g_hidden: tuple[int, ...] = (128, 128)
    non_saturating: bool = False
    clip: float = 0.01
    sn_iters: int = 1
    sn_exact: bool = True
    gp_lambda: float = 10.0
    ortho_beta: float = 1e-4
    eval_noise: int = 256
    divergence_limit: float = 1e6
    collapse_tol: float = 1e-4

    def __post_init__(self):
        MeasuringFunction.for_objective(self.objective)
        self.regularizer  # validates strategy
        for name in ("batch_size", "d_steps", "noise_dim", "eval_noise"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0 or self.checkpoint_every < 0:
            raise ValueError("epochs and checkpoint_every must be non-negative")

    @property
    def phi(self) -> MeasuringFunction:
        return MeasuringFunction.for_objective(self.objective)

    @property
    def regularizer(self) -> RegularizerSpec:
        return RegularizerSpec(self.strategy, clip=self.clip, n_iter=self.sn_iters, lam=self.gp_lambda,
                               beta=self.ortho_beta, sn_exact=self.sn_exact)

    def resolved(self) -> "TrainConfig":
        lr, b1, b2 = adam_defaults(self.objective, self.strategy)
        return replace(self, lr=lr if self.lr is None else self.lr, beta1=b1 if self.beta1 is None else self.beta1,
                       beta2=b2 if self.beta2 is None else self.beta2)


@dataclass
class Checkpoint:
    iteration: int
    d_state: dict[str, np.ndarray]
    g_state: dict[str, np.ndarray]
    effective_weights: list[np.ndarray]


@dataclass
class TrainResult:
    config: TrainConfig
    discriminator: Discriminator
    generator: Generator
    outcome: str = CONVERGED
    reason: str = ""
    iterations: int = 0
    curves: list[dict] = field(default_factory=list)
    checkpoints: list[Checkpoint] = field(default_factory=list)
    clip_audit: list[float] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.outcome == FAILED


class TrainingFailure(RuntimeError):
    pass


def build_models(config: TrainConfig, data_shape: tuple[int, ...]) -> tuple[Discriminator, Generator]:
    rng = RngStream(config.seed)
    in_dim = int(np.prod(data_shape))
    D = Discriminator(in_dim, config.d_hidden, rng.child(0), use_sigmoid=config.objective == "js")
    G = Generator(NoisePrior(config.noise_kind, config.noise_dim), data_shape, config.g_hidden, rng.child(1))
    lipschitz.install(D, config.regularizer, rng.child(3))
    return D, G


def make_optimizers(config: TrainConfig, D, G) -> tuple[Adam, Adam]:
    c = config.resolved()
    return (Adam(D.parameters(), c.lr, c.beta1, c.beta2), Adam(G.parameters(), c.lr, c.beta1, c.beta2))


def train_step_discriminator(D, G, real_batch, noise_batch, config: TrainConfig, opt: Adam, rng) -> float:
    """One ascent step on U_hat (descent on -U_hat plus any penalty).  Returns U_hat."""
    spec = config.regularizer
    lipschitz.before_step(D, spec)
    real = np.asarray(real_batch, dtype=np.float64).reshape(len(real_batch), -1)
    with no_grad():
        fake = G(noise_batch).data
    real_term, fake_term = discriminator_loss_terms(D, real, fake, config.phi)
    u_hat = real_term + fake_term
    loss = -u_hat
    pen = lipschitz.penalty(D, spec, real, fake, rng)
    if pen is not None:
        loss = loss + pen
    params = D.parameters()
    opt.step(grad(loss, params))
    lipschitz.after_step(D, spec)
    return u_hat.item()


def train_step_generator(D, G, noise_batch, config: TrainConfig, opt: Adam) -> float:
    """One descent step on V_hat.  Reads no real data."""
    v_hat = generator_loss_empirical(D, G, noise_batch, config.phi, non_saturating=config.non_saturating)
    opt.step(grad(v_hat, G.parameters()))
    return v_hat.item()


def evaluate_losses(D, G, config: TrainConfig, train_data, heldout, eval_z) -> dict:
    with no_grad():
        fake = G(eval_z).data
        real_tr, fake_term = discriminator_loss_terms(D, _flat(train_data), fake, config.phi)
        row = {"train_loss_d": real_tr.item() + fake_term.item()}
        if heldout is not None and len(heldout):
            real_ho, _ = discriminator_loss_terms(D, _flat(heldout), fake, config.phi)
            row["heldout_loss_d"] = real_ho.item() + fake_term.item()
        else:
            row["heldout_loss_d"] = float("nan")
        row["train_loss_g"] = generator_loss_empirical(D, G, eval_z, config.phi, config.non_saturating).item()
    return row


def _flat(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(len(x), -1)


def train(config: TrainConfig, train_data, heldout=None) -> TrainResult:
    """Alternate discriminator and generator steps over ``train_data``.

    One epoch is one shuffled pass of discriminator minibatches over the
    training set; after every ``d_steps`` discriminator steps the generator
    takes one step.  A NaN/Inf, a diverging loss, or a collapsed generator
    ends the run with outcome ``Failed`` instead of raising.
    """
    config = config.resolved()
    train_data = np.asarray(train_data, dtype=np.float64)
    n = len(train_data)
    if n < config.batch_size:
        raise ValueError(f"dataset of {n} examples is smaller than batch size {config.batch_size}")
    D, G = build_models(config, train_data.shape[1:])
    opt_d, opt_g = make_optimizers(config, D, G)
    rng = RngStream(config.seed)
    batch_rng, noise_rng, reg_rng = rng.child(2), rng.child(4), rng.child(5)
    eval_z = G.prior.sample(config.eval_noise, rng.child(6))
    result = TrainResult(config, D, G)

    def checkpoint(it: int):
        row = {"iteration": it, **evaluate_losses(D, G, config, train_data, heldout, eval_z)}
        result.curves.append(row)
        result.checkpoints.append(Checkpoint(it, {p.name: p.data.copy() for p in D.parameters()},
                                             {p.name: p.data.copy() for p in G.parameters()},
                                             lipschitz.effective_weights(D)))
        for k in ("train_loss_d", "heldout_loss_d", "train_loss_g"):
            if abs(row[k]) > config.divergence_limit:
                raise TrainingFailure(f"{k} diverged to {row[k]:.3g}")

    steps_per_epoch = n // config.batch_size
    it = 0
    try:
        checkpoint(0)
        d_count = 0
        for _ in range(config.epochs):
            order = batch_rng.permutation(n)
            for b in range(steps_per_epoch):
                idx = order[b * config.batch_size:(b + 1) * config.batch_size]
                z = G.prior.sample(config.batch_size, noise_rng)
                u = train_step_discriminator(D, G, train_data[idx], z, config, opt_d, reg_rng)
                if config.strategy == "clip":
                    result.clip_audit.append(max(float(np.max(np.abs(p.data))) for p in D.parameters()))
                d_count += 1
                if d_count % config.d_steps:
                    continue
                v = train_step_generator(D, G, G.prior.sample(config.batch_size, noise_rng), config, opt_g)
                it += 1
                if abs(u) > config.divergence_limit or abs(v) > config.divergence_limit:
                    raise TrainingFailure(f"loss diverged at iteration {it} (U_hat={u:.3g}, V_hat={v:.3g})")
                if config.checkpoint_every and it % config.checkpoint_every == 0:
                    checkpoint(it)
        if not result.curves or result.curves[-1]["iteration"] != it:
            checkpoint(it)
        spread = float(np.mean(np.std(G.sample(256, rng.child(7)).reshape(256, -1), axis=0)))
        if it > 0 and spread < config.collapse_tol:
            raise TrainingFailure(f"generator collapsed (sample spread {spread:.2e})")
    except (NonFiniteError, NonFiniteGradient, FloatingPointError, TrainingFailure) as exc:
        log.info("training failed at iteration %d: %s", it, exc)
        result.outcome, result.reason = FAILED, str(exc)
    result.iterations = it
    return result
