"""Synthetic sinusoid-mixture generator with difficulty knobs.

Each series is a Dirichlet-weighted mixture of k sinusoidal base patterns,
time-shifted by a shared random delay and corrupted with Gaussian noise:

    C(t) = sum_j w_j * A_j sin(2 pi f_j (t - delta) + phi_j) + N(0, sigma^2)

Per-class parameter intervals control difficulty through three integer knobs
in [0, 5], each with 5 as the easy/baseline end of its own convention:

  noise_level:          sigma = 0.3 + 0.1 * level (higher = noisier = harder)
  similarity_level:     below 5, class intervals shift toward each other by
                        0.2 per level step (5 keeps the published baselines,
                        which are already close; LOWER levels push classes
                        apart, so higher = more similar = harder)
  multimodality_level:  below 5, intervals shrink symmetrically about their
                        midpoint by 0.1 width per level step (higher = wider
                        intervals = more intra-class diversity = harder)
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dataio import Dataset, LabeledSeries
from .errors import IntervalCollapseError
from .seeding import derive_rng

BASELINE_INTERVALS = {
    0: {"frequency": (1.0, 1.5), "amplitude": (0.4, 1.2), "phase": (0.0, 0.8)},
    1: {"frequency": (1.1, 1.6), "amplitude": (0.5, 1.3), "phase": (0.2, 1.0)},
}
NOISE_BASE = 0.3
NOISE_PER_LEVEL = 0.1
SIMILARITY_SHIFT_PER_LEVEL = 0.2
MULTIMODALITY_SHRINK_PER_LEVEL = 0.1
MIN_INTERVAL_WIDTH = 0.02
POSITIVE_FLOOR = 0.05  # amplitude and frequency must stay positive
DELAY_RANGE = (0.0, 0.2)


@dataclass(frozen=True)
class PatternParams:
    amplitude: float
    frequency: float
    phase: float

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if self.frequency <= 0:
            raise ValueError(f"frequency must be positive, got {self.frequency}")


@dataclass
class SimConfig:
    noise_level: int = 2
    similarity_level: int = 4
    multimodality_level: int = 3
    n_per_class: int = 50
    length: int = 128
    n_patterns: int = 3
    seed: int = 0

    def __post_init__(self):
        for knob in ("noise_level", "similarity_level", "multimodality_level"):
            v = getattr(self, knob)
            if not (isinstance(v, (int, np.integer)) and 0 <= v <= 5):
                raise ValueError(f"{knob} must be an integer in [0, 5], got {v!r}")
        if self.n_per_class < 2:
            raise ValueError(f"n_per_class must be >= 2, got {self.n_per_class}")
        if self.length < 8:
            raise ValueError(f"length must be >= 8, got {self.length}")
        if self.n_patterns < 1:
            raise ValueError(f"n_patterns must be >= 1, got {self.n_patterns}")
        # fail fast if the knob combination empties any interval
        for label in (0, 1):
            class_intervals(label, self.similarity_level, self.multimodality_level)

    def to_dict(self):
        return {
            "noise_level": self.noise_level,
            "similarity_level": self.similarity_level,
            "multimodality_level": self.multimodality_level,
            "n_per_class": self.n_per_class,
            "length": self.length,
            "n_patterns": self.n_patterns,
            "seed": self.seed,
        }


def noise_sigma(noise_level):
    return NOISE_BASE + NOISE_PER_LEVEL * noise_level


def class_intervals(label, similarity_level, multimodality_level):
    """Per-parameter (low, high) intervals for one class after knob adjustment."""
    shift = SIMILARITY_SHIFT_PER_LEVEL * (5 - similarity_level)
    if label == 0:
        shift = -shift
    shrink = MULTIMODALITY_SHRINK_PER_LEVEL * (5 - multimodality_level)
    out = {}
    for param, (lo, hi) in BASELINE_INTERVALS[label].items():
        lo, hi = lo + shift, hi + shift
        width = max(hi - lo - shrink, MIN_INTERVAL_WIDTH)
        mid = 0.5 * (lo + hi)
        lo, hi = mid - 0.5 * width, mid + 0.5 * width
        if param in ("amplitude", "frequency"):
            lo = max(lo, POSITIVE_FLOOR)
            if lo >= hi:
                raise IntervalCollapseError(
                    f"class {label} {param} interval collapsed: the similarity "
                    f"knob (level {similarity_level}) pushed it to "
                    f"({lo:.3f}, {hi:.3f}) after flooring at {POSITIVE_FLOOR}"
                )
        out[param] = (lo, hi)
    return out


def base_pattern(params, t_grid):
    """A * sin(2 pi f t + phi) sampled on t_grid."""
    t = np.asarray(t_grid, dtype=np.float64)
    return params.amplitude * np.sin(
        2.0 * math.pi * params.frequency * t + params.phase
    )


def combined_pattern(patterns, weights, delay, sigma, t_grid, rng):
    """Weighted pattern mixture, delayed by ``delay``, plus N(0, sigma^2) noise."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(patterns),):
        raise ValueError(
            f"{len(patterns)} patterns but weight shape {weights.shape}"
        )
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must be a convex combination, got {weights}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    t = np.asarray(t_grid, dtype=np.float64)
    clean = np.zeros_like(t)
    for w, p in zip(weights, patterns):
        clean += w * base_pattern(p, t - delay)
    return clean + rng.normal(0.0, sigma, size=t.shape)


@dataclass
class SeriesDraw:
    """Everything sampled for one series, retained for interval assertions."""

    label: int
    patterns: list
    weights: np.ndarray
    delay: float


@dataclass
class SimResult:
    dataset: Dataset
    draws: list = field(default_factory=list)


def _sample_series(intervals, config, sigma, t_grid, label, rng):
    patterns = [
        PatternParams(
            amplitude=rng.uniform(*intervals["amplitude"]),
            frequency=rng.uniform(*intervals["frequency"]),
            phase=rng.uniform(*intervals["phase"]),
        )
        for _ in range(config.n_patterns)
    ]
    weights = rng.dirichlet(np.ones(config.n_patterns))
    delay = rng.uniform(*DELAY_RANGE)
    values = combined_pattern(patterns, weights, delay, sigma, t_grid, rng)
    return values, SeriesDraw(label=label, patterns=patterns,
                              weights=weights, delay=delay)


def generate_sim_dataset(config, return_draws=False):
    """Generate a stratified two-class Dataset from a SimConfig.

    Each class contributes n_per_class series; the first half of each class
    (rounded up) goes to the train split, the rest to test. Per-sample RNG
    streams are derived from (seed, class, index), so generation order never
    affects the data.
    """
    sigma = noise_sigma(config.noise_level)
    t_grid = np.linspace(0.0, 1.0, config.length)
    train, test, draws = [], [], []
    for label in (0, 1):
        intervals = class_intervals(label, config.similarity_level,
                                    config.multimodality_level)
        n_train = (config.n_per_class + 1) // 2
        for i in range(config.n_per_class):
            rng = derive_rng(config.seed, "simgen", label, i)
            values, draw = _sample_series(intervals, config, sigma, t_grid, label, rng)
            series = LabeledSeries(values, label, source_id=f"sim:{label}:{i}")
            (train if i < n_train else test).append(series)
            draws.append(draw)
    name = (f"sim-n{config.noise_level}s{config.similarity_level}"
            f"m{config.multimodality_level}-seed{config.seed}")
    dataset = Dataset(train=train, test=test, name=name,
                      label_map={"0": 0, "1": 1})
    if return_draws:
        return SimResult(dataset=dataset, draws=draws)
    return dataset
