from __future__ import annotations

import math
from enum import Enum

import numpy as np

from ..engine import Tensor, as_tensor, clamp, log, mean, neg, no_grad

LOG_CLAMP = 1e-7


class MeasuringFunction(Enum):
    """The map phi applied to discriminator outputs: log (JS) or identity (Wasserstein)."""

    LOG = "log"
    IDENTITY = "identity"

    @classmethod
    def for_objective(cls, objective: str) -> "MeasuringFunction":
        try:
            return {"js": cls.LOG, "wasserstein": cls.IDENTITY}[objective]
        except KeyError:
            raise ValueError(f"unknown objective {objective!r}; expected 'js' or 'wasserstein'") from None


def measuring_apply(phi: MeasuringFunction, t):
    """phi(t) for a float or a Tensor.  Log of a non-positive value is an error."""
    if isinstance(t, Tensor):
        return log(t) if phi is MeasuringFunction.LOG else t
    t = float(t)
    if phi is MeasuringFunction.IDENTITY:
        return t
    if t <= 0:
        raise ValueError(f"log measuring function undefined at {t}")
    return math.log(t)


def _phi_of_output(phi: MeasuringFunction, d: Tensor, guard: bool) -> Tensor:
    if phi is MeasuringFunction.LOG:
        if guard:
            d = clamp(d, LOG_CLAMP, 1.0 - LOG_CLAMP)
        elif np.any(d.data <= 0):
            raise ValueError("log measuring function applied to a non-positive discriminator output")
        return log(d)
    return d


def discriminator_loss_terms(D, real, fake, phi: MeasuringFunction, guard: bool = True) -> tuple[Tensor, Tensor]:
    """(mean phi(d(x)), mean phi(1 - d(x_fake))) as recorded tensors."""
    real_term = mean(_phi_of_output(phi, D(real), guard))
    fake_term = mean(_phi_of_output(phi, 1.0 - D(fake), guard))
    return real_term, fake_term


def discriminator_loss_empirical(D, G, real_batch, noise_batch, phi: MeasuringFunction,
                                 guard: bool = True) -> Tensor:
    """U_hat = mean_x phi(d(x)) + mean_z phi(1 - d(g(z))), generator held fixed."""
    real_batch = np.asarray(real_batch, dtype=np.float64)
    noise_batch = np.asarray(noise_batch, dtype=np.float64)
    if len(real_batch) != len(noise_batch):
        raise ValueError(f"batch sizes differ: {len(real_batch)} real vs {len(noise_batch)} noise")
    with no_grad():
        fake = G(noise_batch).data
    real_term, fake_term = discriminator_loss_terms(D, real_batch.reshape(len(real_batch), -1), fake, phi, guard)
    return real_term + fake_term


def generator_loss_empirical(D, G, noise_batch, phi: MeasuringFunction, non_saturating: bool = False,
                             guard: bool = True) -> Tensor:
    """V_hat = mean_z phi(1 - d(g(z))); ``non_saturating`` gives -mean phi(d(g(z)))."""
    d_fake = D(G(as_tensor(noise_batch)))
    if non_saturating:
        return neg(mean(_phi_of_output(phi, d_fake, guard)))
    return mean(_phi_of_output(phi, 1.0 - d_fake, guard))
