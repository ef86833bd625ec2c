from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ..engine import Linear, Parameter, Tensor, as_generator, as_tensor, leaky_relu, no_grad, reshape, sigmoid, tanh


@dataclass(frozen=True)
class NoisePrior:
    kind: str = "normal"
    dim: int = 64

    def __post_init__(self):
        if self.kind not in ("normal", "uniform"):
            raise ValueError(f"unknown noise prior {self.kind!r}; expected 'normal' or 'uniform'")
        if self.dim < 1:
            raise ValueError("noise dimension must be >= 1")

    def sample(self, n: int, rng) -> np.ndarray:
        gen = as_generator(rng)
        if self.kind == "normal":
            return gen.standard_normal((n, self.dim))
        return gen.uniform(-1.0, 1.0, size=(n, self.dim))


class _MLP:
    def __init__(self, sizes: Sequence[int], rng, prefix: str):
        gen = as_generator(rng)
        self.layers = [Linear(a, b, gen, i, prefix) for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def weights(self) -> list[Parameter]:
        return [layer.weight for layer in self.layers]

    def _trunk(self, h: Tensor) -> Tensor:
        for layer in self.layers[:-1]:
            h = leaky_relu(layer(h))
        return self.layers[-1](h)


class Discriminator(_MLP):
    """MLP critic d(x; theta_d) over flattened inputs.

    With ``use_sigmoid`` the output lies in (0, 1) and ``output_bound`` = 1 is
    exact.  Without it (Wasserstein mode) the output is unbounded and
    ``bound_verified`` is False, which tells the attack code to rescale
    scores empirically.
    """

    def __init__(self, in_dim: int, hidden: Sequence[int] = (128, 128), rng=None, use_sigmoid: bool = True,
                 output_bound: float = 1.0):
        if output_bound <= 0:
            raise ValueError("output_bound must be positive")
        super().__init__([in_dim, *hidden, 1], rng, "D.")
        self.in_dim = in_dim
        self.use_sigmoid = use_sigmoid
        self.output_bound = output_bound
        self.bound_verified = use_sigmoid

    def __call__(self, x) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 2:
            x = reshape(x, (x.shape[0], -1))
        out = reshape(self._trunk(x), (x.shape[0],))
        return sigmoid(out) if self.use_sigmoid else out

    def score(self, x: np.ndarray) -> np.ndarray:
        """Forward pass without recording; returns d(x) as an array."""
        with no_grad():
            return self(np.asarray(x, dtype=np.float64).reshape(len(x), -1)).data


class Generator(_MLP):
    """MLP generator g(z; theta_g) with a tanh output in [-1, 1]."""

    def __init__(self, prior: NoisePrior, out_shape: Sequence[int], hidden: Sequence[int] = (128, 128), rng=None):
        self.prior = prior
        self.out_shape = tuple(out_shape)
        self.out_dim = int(math.prod(self.out_shape))
        super().__init__([prior.dim, *hidden, self.out_dim], rng, "G.")

    def __call__(self, z) -> Tensor:
        return tanh(self._trunk(as_tensor(z)))

    def sample(self, n: int, rng) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be >= 1")
        z = self.prior.sample(n, rng)
        with no_grad():
            flat = self(z).data
        return flat.reshape((n, *self.out_shape))


def all_parameters(*models) -> Iterator[Parameter]:
    for m in models:
        yield from m.parameters()
