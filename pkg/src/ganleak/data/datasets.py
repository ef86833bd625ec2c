from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..engine import as_generator


@dataclass
class Dataset:
    """Examples of uniform shape, scaled to [-1, 1], with an optional train/holdout partition.

    ``scale`` maps the stored values back to the original units
    (``raw = examples * scale``); it is 1 for images.
    """

    examples: np.ndarray
    source: str = "synthetic"
    labels: np.ndarray | None = None
    ids: np.ndarray | None = None
    scale: float = 1.0
    train_idx: np.ndarray | None = None
    holdout_idx: np.ndarray | None = None
    paths: list[str] | None = None
    skipped: int = 0

    def __post_init__(self):
        self.examples = np.asarray(self.examples, dtype=np.float64)
        if self.examples.ndim < 2:
            raise ValueError("examples must have a leading example axis and at least one feature axis")
        if self.ids is None:
            self.ids = np.arange(len(self.examples))
        if len(self.ids) != len(self.examples):
            raise ValueError("one id per example is required")
        if self.examples.size and (self.examples.min() < -1.0 - 1e-12 or self.examples.max() > 1.0 + 1e-12):
            raise ValueError("examples must be normalised to [-1, 1]")

    def __len__(self) -> int:
        return len(self.examples)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.examples.shape[1:]

    @property
    def channels(self) -> int:
        return self.examples.shape[1] if self.examples.ndim == 4 else 1

    def raw(self) -> np.ndarray:
        return self.examples * self.scale

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.examples[idx], self.source,
                       None if self.labels is None else self.labels[idx], self.ids[idx], self.scale,
                       paths=None if self.paths is None else [self.paths[i] for i in idx])

    @property
    def partitioned(self) -> bool:
        return self.train_idx is not None

    @property
    def train(self) -> "Dataset":
        if not self.partitioned:
            raise ValueError("dataset has no train/holdout partition")
        return self.subset(self.train_idx)

    @property
    def holdout(self) -> "Dataset":
        if not self.partitioned:
            raise ValueError("dataset has no train/holdout partition")
        return self.subset(self.holdout_idx)


@dataclass(frozen=True)
class GaussianRingConfig:
    n_modes: int = 8
    radius: float = 2.0
    std: float = 0.05
    samples: int = 512

    def __post_init__(self):
        if self.n_modes < 1 or self.std <= 0 or self.samples < 1 or self.radius < 0:
            raise ValueError("invalid Gaussian ring configuration")

    def centers(self) -> np.ndarray:
        angles = 2.0 * np.pi * np.arange(self.n_modes) / self.n_modes
        return self.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def synth_gaussian_ring(config: GaussianRingConfig, rng) -> Dataset:
    """Equal-weight mixture of ``n_modes`` isotropic Gaussians on a circle.

    Points are scaled by ``radius + 4 std`` into the unit box (rare points
    beyond that are clipped); ``Dataset.raw()`` undoes the scaling.
    """
    gen = as_generator(rng)
    modes = gen.integers(0, config.n_modes, size=config.samples)
    pts = config.centers()[modes] + gen.normal(0.0, config.std, size=(config.samples, 2))
    scale = config.radius + 4.0 * config.std
    return Dataset(np.clip(pts / scale, -1.0, 1.0), "synthetic:ring", labels=modes, scale=scale)


@dataclass(frozen=True)
class PatternConfig:
    """8x8 single-channel images: one of ``n_classes`` templates plus pixel noise."""

    size: int = 8
    n_classes: int = 8
    noise: float = 0.35
    samples: int = 512

    def __post_init__(self):
        if self.size < 2 or not 1 <= self.n_classes <= 8 or self.noise < 0 or self.samples < 1:
            raise ValueError("invalid pattern configuration")


def pattern_templates(size: int = 8) -> np.ndarray:
    r, c = np.mgrid[0:size, 0:size] / (size - 1)
    mid = (size - 1) / 2
    rr, cc = np.mgrid[0:size, 0:size]
    dist = np.hypot(rr - mid, cc - mid) / mid
    t = np.stack([
        np.where(rr % 2 == 0, 1.0, -1.0),                # horizontal stripes
        np.where(cc % 2 == 0, 1.0, -1.0),                # vertical stripes
        np.where((rr + cc) % 2 == 0, 1.0, -1.0),         # checkerboard
        np.where(dist < 0.6, 1.0, -1.0),                 # disc
        np.where(np.abs(dist - 0.8) < 0.25, 1.0, -1.0),  # ring
        2.0 * r - 1.0,                                   # vertical gradient
        2.0 * c - 1.0,                                   # horizontal gradient
        np.where(rr == cc, 1.0, -1.0) + np.where(rr == size - 1 - cc, 2.0, 0.0),  # cross
    ])
    return np.clip(t, -1.0, 1.0)


def synth_patterns(config: PatternConfig, rng) -> Dataset:
    gen = as_generator(rng)
    templates = pattern_templates(config.size)[: config.n_classes]
    labels = gen.integers(0, config.n_classes, size=config.samples)
    imgs = templates[labels] * 0.7 + gen.normal(0.0, config.noise, size=(config.samples, config.size, config.size))
    return Dataset(np.clip(imgs, -1.0, 1.0)[:, None, :, :], "synthetic:patterns", labels=labels)


def split_train_holdout(dataset: Dataset, fraction: float, rng) -> Dataset:
    """Random disjoint train/holdout partition with ``round(fraction * n)`` training examples."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    n = len(dataset)
    n_train = int(round(fraction * n))
    if n_train < 1 or n - n_train < 1:
        raise ValueError(f"split of {n} examples at fraction {fraction} leaves an empty side")
    perm = as_generator(rng).permutation(n)
    return replace(dataset, train_idx=np.sort(perm[:n_train]), holdout_idx=np.sort(perm[n_train:]))


def fixed_partition(dataset: Dataset, n_train: int) -> Dataset:
    """Provider-style partition: the first ``n_train`` examples train, the rest are held out."""
    if not 0 < n_train < len(dataset):
        raise ValueError("n_train must leave both sides non-empty")
    return replace(dataset, train_idx=np.arange(n_train), holdout_idx=np.arange(n_train, len(dataset)))


def write_manifest(path, dataset: Dataset) -> None:
    """One line per example: ``<path or id> <train|holdout>``."""
    if not dataset.partitioned:
        raise ValueError("dataset has no partition to record")
    names = dataset.paths or [str(i) for i in dataset.ids]
    tags = {}
    for i in dataset.train_idx:
        tags[int(i)] = "train"
    for i in dataset.holdout_idx:
        tags[int(i)] = "holdout"
    with open(path, "w") as fh:
        for i in sorted(tags):
            fh.write(f"{names[i]} {tags[i]}\n")


def read_manifest(path) -> list[tuple[str, str]]:
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            name, tag = line.rsplit(" ", 1)
            if tag not in ("train", "holdout"):
                raise ValueError(f"bad split tag {tag!r} in manifest")
            rows.append((name, tag))
    return rows
