"""Flat ``key = value`` experiment configuration with strict parsing."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from ..lipschitz import STRATEGIES

OBJECTIVES = ("js", "wasserstein")
ATTACK_MODES = ("whitebox", "blackbox", "both")


class ConfigError(ValueError):
    pass


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _words(text: str) -> tuple[str, ...]:
    return tuple(v for v in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One grid of runs.

    ``strategy``/``objective`` name a single cell; ``strategies`` and
    ``objectives`` (when given) expand into a grid for ``suite``.  Every
    emitted number is a function of this object and the run seed.
    """

    dataset: str = "ring"  # ring | patterns | folder:<path>
    strategy: str = "original"
    objective: str = "js"
    strategies: tuple[str, ...] = ()
    objectives: tuple[str, ...] = ()
    seeds: tuple[int, ...] = (0, 1, 2)
    epochs: int = 2000
    attack: str = "whitebox"
    out: str = "results"
    samples: int = 128
    train_fraction: float = 0.5
    n_train: int = 0  # > 0 selects a fixed provider-style partition instead of a random split
    ring_std: float = 0.2
    ring_modes: int = 8
    pattern_noise: float = 0.5
    image_size: int = 8
    batch_size: int = 64
    d_hidden: tuple[int, ...] = (128, 128)
    g_hidden: tuple[int, ...] = (128, 128)
    noise_dim: int = 64
    noise_kind: str = "normal"
    d_steps: int = 1
    checkpoint_every: int = 0
    non_saturating: bool = False
    aux_fraction: float = 0.3
    score_samples: int = 500
    workers: int = 1

    def __post_init__(self):
        for s in (self.strategy, *self.strategies):
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}; expected one of {', '.join(STRATEGIES)}")
        for o in (self.objective, *self.objectives):
            if o not in OBJECTIVES:
                raise ConfigError(f"unknown objective {o!r}; expected js or wasserstein")
        if self.attack not in ATTACK_MODES:
            raise ConfigError(f"unknown attack mode {self.attack!r}")
        if not (self.dataset in ("ring", "patterns") or self.dataset.startswith("folder:")):
            raise ConfigError(f"unknown dataset {self.dataset!r}; expected ring, patterns or folder:<path>")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not 0.0 < self.train_fraction < 1.0 or not 0.0 < self.aux_fraction < 1.0:
            raise ConfigError("fractions must lie strictly between 0 and 1")
        for name in ("samples", "batch_size", "noise_dim", "d_steps", "workers", "image_size", "score_samples",
                     "ring_modes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epochs < 0 or self.checkpoint_every < 0 or self.n_train < 0:
            raise ConfigError("epochs, checkpoint_every and n_train must be non-negative")
        if self.ring_std <= 0 or self.pattern_noise < 0:
            raise ConfigError("ring_std must be positive and pattern_noise non-negative")

    def cells(self) -> list[tuple[str, str]]:
        strategies = self.strategies or (self.strategy,)
        objectives = self.objectives or (self.objective,)
        return [(s, o) for o in objectives for s in strategies]

    def with_cell(self, strategy: str, objective: str) -> "ExperimentConfig":
        return dataclasses.replace(self, strategy=strategy, objective=objective, strategies=(), objectives=())

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_PARSERS = {}
for _f in fields(ExperimentConfig):
    _default = _f.default
    if isinstance(_default, bool):
        _PARSERS[_f.name] = _bool
    elif isinstance(_default, int):
        _PARSERS[_f.name] = int
    elif isinstance(_default, float):
        _PARSERS[_f.name] = float
    elif isinstance(_default, tuple):
        _PARSERS[_f.name] = _ints if _f.name in ("seeds", "d_hidden", "g_hidden") else _words
    else:
        _PARSERS[_f.name] = str


def parse_pairs(pairs: dict[str, str], base: ExperimentConfig | None = None) -> ExperimentConfig:
    unknown = sorted(set(pairs) - set(_PARSERS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    values = {}
    for key, text in pairs.items():
        try:
            values[key] = _PARSERS[key](text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None
    return dataclasses.replace(base or ExperimentConfig(), **values)


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment; repeated keys are errors."""
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return parse_pairs(pairs, base)


def load_config(path=None, overrides: list[str] | None = None) -> ExperimentConfig:
    """Read a config file (optional) and apply ``key=value`` overrides on top."""
    cfg = parse_config_text(Path(path).read_text()) if path else ExperimentConfig()
    if overrides:
        pairs = {}
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            k, v = item.split("=", 1)
            pairs[k.strip()] = v.strip()
        cfg = parse_pairs(pairs, cfg)
    return cfg


@dataclass(frozen=True)
class AuditConfig:
    epsilons: tuple[float, ...] = (0.1, 0.5, 1.0)
    mechanism: str = "exponential"
    m: int = 20
    n_hypotheses: int = 8
    p: float = 0.3
    n_runs: int = 200
    convergence: bool = False
    convergence_runs: int = 200
    convergence_epsilon: float = 0.1
    seed: int = 0
    out: str = "audit"
