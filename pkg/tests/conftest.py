import numpy as np
import pytest
from hypothesis import settings

from ganleak.data import GaussianRingConfig, split_train_holdout, synth_gaussian_ring
from ganleak.gan import Discriminator, Generator, NoisePrior

settings.register_profile("ganleak", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("ganleak")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ring_split():
    ds = synth_gaussian_ring(GaussianRingConfig(samples=256, std=0.2), 3)
    return split_train_holdout(ds, 0.5, 3)


@pytest.fixture
def tiny_gan(rng):
    D = Discriminator(2, (8, 8), rng)
    G = Generator(NoisePrior("normal", 4), (2,), (8,), rng)
    return D, G


_ACCEPTANCE: list[str] = []


@pytest.fixture
def report_criterion():
    """Record one pass/fail line per acceptance criterion; the lines are repeated in the terminal summary."""

    def report(number, passed: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE.append(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
