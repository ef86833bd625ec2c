from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import Parameter


class NonFiniteGradient(FloatingPointError):
    def __init__(self, name: str):
        self.parameter = name
        super().__init__(f"non-finite gradient for parameter {name!r}; step aborted")


@dataclass
class AdamState:
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0


def adam_step(params: list[Parameter], grads, state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps_adam: float = 1e-8) -> AdamState:
    """One bias-corrected Adam update, applied in place.

    Every gradient is checked before any parameter moves, so a non-finite
    gradient leaves both parameters and moments untouched.
    """
    if lr < 0:
        raise ValueError("lr must be non-negative")
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ValueError("betas must lie in [0, 1)")
    garrs = [np.asarray(getattr(g, "data", g), dtype=np.float64) for g in grads]
    if len(garrs) != len(params):
        raise ValueError("one gradient per parameter is required")
    for p, g in zip(params, garrs):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match {p.name} {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(p.name)
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]

    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, garrs, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data = p.data - lr * (m / bc1) / (np.sqrt(v / bc2) + eps_adam)
    return state


class Adam:
    def __init__(self, params, lr: float = 2e-4, beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state = AdamState()

    def step(self, grads) -> None:
        adam_step(self.params, grads, self.state, self.lr, self.beta1, self.beta2, self.eps)


def sgd_step(params: list[Parameter], grads, lr: float) -> None:
    for p, g in zip(params, grads):
        g = np.asarray(getattr(g, "data", g))
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(p.name)
        p.data = p.data - lr * g
