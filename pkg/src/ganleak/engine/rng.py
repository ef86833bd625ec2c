from __future__ import annotations

import numpy as np


class RngStream:
    """Seeded random stream backed by PCG64.

    PCG64 output is specified bit-for-bit, so a seed gives the same sequence
    on every platform.  ``child(i)`` derives an independent stream for the
    i-th repetition of an experiment from ``(seed, i)``.
    """

    def __init__(self, seed: int, *path: int):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, *self.path])))
        self.counter = 0

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, *self.path, index)

    def __getattr__(self, name):
        # draw methods (normal, uniform, ...) go to the generator; count them
        attr = getattr(self.generator, name)
        if callable(attr):
            def counted(*args, **kwargs):
                self.counter += 1
                return attr(*args, **kwargs)
            return counted
        return attr


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
