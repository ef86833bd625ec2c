from __future__ import annotations

from typing import Callable, Iterator

import numpy as np

from .tensor import Tensor, affine

INIT_STD = 0.02


class Parameter(Tensor):
    """A trainable leaf tensor whose shape is fixed at construction."""

    __slots__ = ("role", "layer", "name")

    def __init__(self, data, role: str = "weight", layer: int = 0, name: str = ""):
        if role not in ("weight", "bias"):
            raise ValueError(f"unknown parameter role {role!r}")
        super().__init__(data, requires_grad=True)
        self.role = role
        self.layer = layer
        self.name = name

    def assign(self, value) -> None:
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self.data.shape:
            raise ValueError(f"{self.name or 'parameter'}: shape is fixed at {self.data.shape}, got {value.shape}")
        if not np.all(np.isfinite(value)):
            raise FloatingPointError(f"{self.name or 'parameter'}: refusing non-finite assignment")
        self.data = value.copy()


WeightHook = Callable[["Linear", Tensor], Tensor]


class Linear:
    """Affine layer, weight stored as (out_features, in_features).

    ``weight_hook`` lets a regularizer substitute the matrix used in the
    forward pass (spectral or row normalisation) while the optimizer keeps
    updating the raw parameter.
    """

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, layer: int, prefix: str = "",
                 init_std: float = INIT_STD):
        self.n_in, self.n_out = n_in, n_out
        self.layer = layer
        self.weight = Parameter(rng.normal(0.0, init_std, size=(n_out, n_in)), "weight", layer,
                                f"{prefix}{layer}.weight")
        self.bias = Parameter(np.zeros(n_out), "bias", layer, f"{prefix}{layer}.bias")
        self.weight_hook: WeightHook | None = None
        self.hook_state = None

    def effective_weight(self) -> Tensor:
        if self.weight_hook is None:
            return self.weight
        return self.weight_hook(self, self.weight)

    def __call__(self, x: Tensor) -> Tensor:
        return affine(x, self.effective_weight(), self.bias)

    def parameters(self) -> Iterator[Parameter]:
        yield self.weight
        yield self.bias


def state_dict(params) -> dict[str, np.ndarray]:
    return {p.name: p.data.copy() for p in params}


def load_state_dict(params, state: dict[str, np.ndarray]) -> None:
    for p in params:
        if p.name not in state:
            raise KeyError(f"missing parameter {p.name!r} in state")
        p.assign(state[p.name])
