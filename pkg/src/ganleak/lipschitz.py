"""Lipschitz regularizers for the discriminator.

Three ways a regularizer acts on training:

* ``projection``  -- applied to the raw parameters after every optimizer step
  (weight clipping);
* ``reparam``     -- the forward pass uses a transformed weight matrix while
  the optimizer updates the raw one (spectral and row normalisation);
* ``penalty``     -- a differentiable term added to the discriminator loss
  (gradient penalty, orthonormal penalty).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .engine import Linear, Tensor, as_generator, as_tensor, grad, l2_norm, matmul, mean, no_grad, sqrt, square, transpose, tsum

STRATEGIES = ("original", "clip", "spectral", "gp", "weightnorm", "orthonormal")

_MODES = {
    "original": "none",
    "clip": "projection",
    "spectral": "reparam",
    "weightnorm": "reparam",
    "gp": "penalty",
    "orthonormal": "penalty",
}


@dataclass(frozen=True)
class RegularizerSpec:
    kind: str = "original"
    clip: float = 0.01
    n_iter: int = 1
    lam: float = 10.0
    beta: float = 1e-4
    sn_warmup: int = 50
    sn_exact: bool = True

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {', '.join(STRATEGIES)}")
        if self.clip <= 0 or self.lam <= 0 or self.beta <= 0:
            raise ValueError("clip, lam and beta must be positive")
        if self.n_iter < 1 or self.sn_warmup < 0:
            raise ValueError("n_iter must be >= 1 and sn_warmup >= 0")

    @property
    def mode(self) -> str:
        return _MODES[self.kind]


# -- weight clipping ------------------------------------------------------------
def weight_clip(params, c: float):
    """Project every entry of every parameter into [-c, c], in place."""
    if c <= 0:
        raise ValueError("clip bound must be positive")
    for p in params:
        p.data = np.clip(p.data, -c, c)
    return params


# -- spectral normalisation -------------------------------------------------------
@dataclass
class PowerIterState:
    u: np.ndarray
    v: np.ndarray | None = None
    degenerate: bool = False
    sigma: float = float("nan")


def _unit(x: np.ndarray) -> tuple[np.ndarray, float]:
    n = float(np.linalg.norm(x))
    return (x / n if n > 0 else x), n


def power_iterate(W: np.ndarray, state: PowerIterState, n_iter: int = 1) -> float:
    """Refine the persisted left vector ``u`` and return the sigma estimate."""
    if state.u.shape != (W.shape[0],):
        raise ValueError(f"power-iteration vector has shape {state.u.shape}, matrix has {W.shape[0]} rows")
    u = state.u
    v = state.v
    for _ in range(n_iter):
        v, nv = _unit(W.T @ u)
        u, nu = _unit(W @ v)
        if nv == 0 or nu == 0:
            state.degenerate = True
            state.sigma = 0.0
            return 0.0
    state.u, state.v, state.degenerate = u, v, False
    state.sigma = float(u @ W @ v)
    return state.sigma


def exact_top_pair(W: np.ndarray, state: PowerIterState) -> float:
    """Store the exact top singular pair of ``W`` in ``state`` and return sigma_max.

    Signs follow the previous ``u`` so the persisted vectors change smoothly.
    """
    if state.u.shape != (W.shape[0],):
        raise ValueError(f"power-iteration vector has shape {state.u.shape}, matrix has {W.shape[0]} rows")
    U, S, Vt = np.linalg.svd(W, full_matrices=False)
    if S[0] == 0:
        state.degenerate = True
        state.sigma = 0.0
        return 0.0
    u, v = U[:, 0], Vt[0]
    if u @ state.u < 0:
        u, v = -u, -v
    state.u, state.v, state.degenerate = u, v, False
    state.sigma = float(S[0])
    return state.sigma


def new_power_state(n_rows: int, rng) -> PowerIterState:
    u, _ = _unit(as_generator(rng).standard_normal(n_rows))
    return PowerIterState(u=u)


def spectral_normalize(W, state: PowerIterState, n_iter: int | None = 1) -> Tensor:
    """Return W / sigma_hat with sigma_hat = u^T W v from persisted vectors.

    ``n_iter`` rounds of power iteration run first (pass ``None`` or 0 to
    reuse the current vectors).  Gradients flow through W in both the
    numerator and sigma_hat; u and v are constants.  A zero matrix is
    returned unchanged and ``state.degenerate`` is set.
    """
    W = as_tensor(W)
    if W.ndim != 2:
        W2 = W.reshape(W.shape[0], -1)
    else:
        W2 = W
    if n_iter:
        power_iterate(W2.data, state, n_iter)
    elif state.v is None:
        power_iterate(W2.data, state, 1)
    if state.degenerate:
        warnings.warn("spectral_normalize: zero weight matrix left unnormalised", RuntimeWarning, stacklevel=2)
        return W
    u = Tensor(state.u.reshape(1, -1))
    v = Tensor(state.v.reshape(-1, 1))
    sigma = matmul(matmul(u, W2), v).reshape(())
    return W / sigma


# -- row-wise weight normalisation --------------------------------------------------
def weight_norm_rows(W) -> Tensor:
    W = as_tensor(W)
    sq = tsum(square(W), axis=1, keepdims=True)
    zero = sq.data == 0
    if np.any(zero):
        warnings.warn("weight_norm_rows: zero rows passed through unnormalised", RuntimeWarning, stacklevel=2)
        sq = sq + Tensor(zero.astype(np.float64))
    return W / sqrt(sq)


# -- penalties --------------------------------------------------------------------------
def orthonormal_penalty(W, beta: float) -> Tensor:
    """beta * ||W^T W - I||_F^2."""
    W = as_tensor(W)
    gram = matmul(transpose(W), W)
    return tsum(square(gram - Tensor(np.eye(gram.shape[0])))) * beta


def gradient_penalty(D, real, fake, lam: float, rng) -> Tensor:
    """lam * mean over interpolates of (||grad_x d(x_hat)||_2 - 1)^2.

    The result is recorded, so its gradient with respect to the
    discriminator parameters is available (double backpropagation).
    """
    real = np.asarray(getattr(real, "data", real), dtype=np.float64).reshape(len(real), -1)
    fake = np.asarray(getattr(fake, "data", fake), dtype=np.float64).reshape(len(fake), -1)
    if real.shape != fake.shape:
        raise ValueError(f"gradient_penalty: real {real.shape} and fake {fake.shape} batches differ")
    alpha = as_generator(rng).uniform(0.0, 1.0, size=(len(real), 1))
    x_hat = Tensor(alpha * real + (1.0 - alpha) * fake, requires_grad=True)
    out = tsum(D(x_hat))
    (g,) = grad(out, [x_hat], create_graph=True)
    norms = l2_norm(g, axis=1, eps=1e-12)
    return mean(square(norms - 1.0)) * lam


# -- wiring into a discriminator --------------------------------------------------------
def install(D, spec: RegularizerSpec, rng) -> None:
    """Attach reparameterisation hooks for ``spec`` to every layer of ``D``."""
    gen = as_generator(rng)
    for layer in D.layers:
        layer.weight_hook = None
        layer.hook_state = None
        if spec.kind == "spectral":
            layer.hook_state = new_power_state(layer.n_out, gen)
            _refresh(layer, spec, max(spec.n_iter, spec.sn_warmup))
            layer.weight_hook = _spectral_hook
        elif spec.kind == "weightnorm":
            layer.weight_hook = _rownorm_hook
    D.regularizer = spec


def _spectral_hook(layer: Linear, W: Tensor) -> Tensor:
    return spectral_normalize(W, layer.hook_state, n_iter=None)


def _rownorm_hook(layer: Linear, W: Tensor) -> Tensor:
    return weight_norm_rows(W)


def before_step(D, spec: RegularizerSpec) -> None:
    """Hook run before each discriminator step (currently nothing needs it)."""


def _refresh(layer: Linear, spec: RegularizerSpec, n_iter: int) -> None:
    if spec.sn_exact:
        exact_top_pair(layer.weight.data, layer.hook_state)
    else:
        power_iterate(layer.weight.data, layer.hook_state, n_iter)


def refresh_spectral(D, spec: RegularizerSpec) -> None:
    """Advance every persisted power iteration by ``spec.n_iter`` rounds on the current weights."""
    for layer in D.layers:
        _refresh(layer, spec, spec.n_iter)


def penalty(D, spec: RegularizerSpec, real, fake, rng) -> Tensor | None:
    if spec.kind == "gp":
        return gradient_penalty(D, real, fake, spec.lam, rng)
    if spec.kind == "orthonormal":
        total = None
        for w in D.weights():
            term = orthonormal_penalty(w, spec.beta)
            total = term if total is None else total + term
        return total
    return None


def after_step(D, spec: RegularizerSpec) -> None:
    """Post-step projection (clip) or refresh of the persisted singular vectors (spectral).

    Refreshing right after the optimizer moves W means every later forward
    pass, including the generator step, divides by an estimate that has
    already seen the current weights.  ``sn_exact`` (the default) stores the
    exact top singular pair; otherwise ``n_iter`` power-iteration rounds run.
    """
    if spec.kind == "clip":
        weight_clip(D.parameters(), spec.clip)
    elif spec.kind == "spectral":
        refresh_spectral(D, spec)


def effective_weights(D) -> list[np.ndarray]:
    """The matrices the forward pass actually multiplies by."""
    with no_grad():
        return [layer.effective_weight().data.copy() for layer in D.layers]
