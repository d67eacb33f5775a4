"""Registration settings and their JSON representation.

Defaults follow the reference VoxelOpt setup: a 5-level pyramid, 27
neighbour cost volumes (k = 1), blurring cap alpha = 1.5, six coordinate
descent iterations with theta = 150, 50, 15, 5, 1.5, 0.5 and seven
scaling-and-squaring steps. The reference gives no softmax temperature beta;
0.1 suits L1 costs of features scaled to [0, 1].
"""

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError

DEFAULT_THETAS = (150.0, 50.0, 15.0, 5.0, 1.5, 0.5)
FEATURE_MODES = ("raw", "mind", "external")


def theta_schedule(iterations):
    """Decaying theta values for a given iteration count.

    Six iterations give the reference schedule; other counts use a geometric
    sequence between the same end points (the reference one is nearly
    geometric already).
    """
    if int(iterations) != iterations or iterations < 1:
        raise ConfigError(f"must be a positive integer, got {iterations!r}", "iterations")
    iterations = int(iterations)
    if iterations == len(DEFAULT_THETAS):
        return DEFAULT_THETAS
    if iterations == 1:
        return DEFAULT_THETAS[:1]
    return tuple(float(t) for t in np.geomspace(DEFAULT_THETAS[0], DEFAULT_THETAS[-1], iterations))


def _positive(key, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", key)
    if integer and int(value) != value:
        raise ConfigError(f"expected an integer, got {value!r}", key)
    if not math.isfinite(value) or value <= 0:
        raise ConfigError(f"must be positive, got {value!r}", key)


def _boolean(key, value):
    if not isinstance(value, bool):
        raise ConfigError(f"expected true or false, got {value!r}", key)


@dataclass(frozen=True)
class LevelSolverConfig:
    """Settings of the per-level coordinate descent."""

    thetas: tuple = DEFAULT_THETAS
    adaptive: bool = True
    prefilter: bool = True
    alpha: float = 1.5
    beta: float = 0.1
    k: int = 1

    def __post_init__(self):
        thetas = self.thetas
        if isinstance(thetas, (str, bytes)) or not hasattr(thetas, "__len__") or len(thetas) == 0:
            raise ConfigError("must be a non-empty list of numbers", "thetas")
        for t in thetas:
            _positive("thetas", t)
        if any(b >= a for a, b in zip(thetas, thetas[1:])):
            raise ConfigError("must be strictly decreasing", "thetas")
        object.__setattr__(self, "thetas", tuple(float(t) for t in thetas))
        _boolean("adaptive", self.adaptive)
        _boolean("prefilter", self.prefilter)
        _positive("alpha", self.alpha)
        _positive("beta", self.beta)
        _positive("k", self.k, integer=True)
        object.__setattr__(self, "k", int(self.k))

    @property
    def iterations(self):
        return len(self.thetas)

    @property
    def isotropic_sigma(self):
        """Kernel width used when adaptivity is switched off (the adaptive cap)."""
        return self.alpha * math.log(2.0)


@dataclass(frozen=True)
class RegistrationConfig:
    levels: int = 5
    integration_steps: int = 7
    feature_mode: str = "raw"
    intensity_window: tuple = (-800.0, 500.0)
    mind_sigma: float = 0.5
    zscore_external: bool = False
    level: LevelSolverConfig = field(default_factory=LevelSolverConfig)

    def __post_init__(self):
        _positive("levels", self.levels, integer=True)
        _positive("integration_steps", self.integration_steps, integer=True)
        object.__setattr__(self, "levels", int(self.levels))
        object.__setattr__(self, "integration_steps", int(self.integration_steps))
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(f"must be one of {FEATURE_MODES}, got {self.feature_mode!r}",
                              "feature_mode")
        win = self.intensity_window
        if win is not None:
            if (isinstance(win, (str, bytes)) or not hasattr(win, "__len__") or len(win) != 2
                    or any(isinstance(w, bool) or not isinstance(w, (int, float)) for w in win)):
                raise ConfigError("must be null or a pair [low, high]", "intensity_window")
            if not win[0] < win[1]:
                raise ConfigError("low bound must be below high bound", "intensity_window")
            object.__setattr__(self, "intensity_window", (float(win[0]), float(win[1])))
        _positive("mind_sigma", self.mind_sigma)
        _boolean("zscore_external", self.zscore_external)

    def with_level(self, **changes):
        return replace(self, level=replace(self.level, **changes))

    def to_dict(self):
        """Flat, JSON-ready view; the inverse of :func:`config_from_dict`."""
        d = asdict(self)
        d.update(d.pop("level"))
        d["thetas"] = list(d["thetas"])
        if d["intensity_window"] is not None:
            d["intensity_window"] = list(d["intensity_window"])
        return d


_LEVEL_KEYS = {f.name for f in fields(LevelSolverConfig)}
_TOP_KEYS = {f.name for f in fields(RegistrationConfig)} - {"level"}


def config_from_dict(doc):
    """Build a :class:`RegistrationConfig` from a flat mapping; missing keys take defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = sorted(set(doc) - _LEVEL_KEYS - _TOP_KEYS)
    if unknown:
        raise ConfigError("unknown configuration key", unknown[0])
    level = LevelSolverConfig(**{k: v for k, v in doc.items() if k in _LEVEL_KEYS})
    return RegistrationConfig(level=level, **{k: v for k, v in doc.items() if k in _TOP_KEYS})


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return config_from_dict(doc)


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")
