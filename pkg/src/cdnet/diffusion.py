"""Noise schedules and the inter-sample forward diffusion processes.

A forward trajectory starts at an anchor series x^0 and, at each step t,
mixes the previous state toward a fixed partner series while adding Gaussian
noise:

    x^t = sqrt(1 - beta_t) * x^{t-1} + (1 - sqrt(1 - beta_t)) * partner
          + sqrt(beta_t) * eps,      eps ~ N(0, noise_std^2 I)

Within-class trajectories use a partner of the anchor's class; across-class
trajectories interpolate toward the other class. The trajectory records its
noise draws so tests can verify the process moments exactly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError


@dataclass(frozen=True)
class ChainKind:
    """Identifies one (process, class) pair: the trajectory origin's class and
    the class it interpolates toward. source == target is the within-class
    process; the same value labels the reverse chain trained on it."""

    source: int
    target: int

    def __post_init__(self):
        if self.source not in (0, 1) or self.target not in (0, 1):
            raise ValueError(f"chain classes must be 0 or 1, got {self}")

    @property
    def process(self):
        return "within" if self.source == self.target else "across"

    @property
    def name(self):
        if self.source == self.target:
            return f"within{self.source}"
        return f"across{self.source}to{self.target}"


ALL_KINDS = (ChainKind(0, 0), ChainKind(1, 1), ChainKind(0, 1), ChainKind(1, 0))


def kind_from_name(name):
    for kind in ALL_KINDS:
        if kind.name == name:
            return kind
    raise ValueError(f"unknown chain kind {name!r}")


@dataclass(frozen=True)
class NoiseSchedule:
    betas: tuple

    def __post_init__(self):
        betas = tuple(float(b) for b in self.betas)
        object.__setattr__(self, "betas", betas)
        if not betas:
            raise ValueError("schedule needs at least one step")
        for b in betas:
            if not 0.0 < b < 1.0:
                raise ValueError(f"every beta must lie in (0, 1), got {b}")
        if any(b2 < b1 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError(f"betas must be non-decreasing, got {betas}")

    @property
    def t_steps(self):
        return len(self.betas)


def linear_schedule(t_steps, beta_min, beta_max):
    """Evenly spaced betas from beta_min to beta_max over t_steps steps."""
    if t_steps < 1:
        raise ValueError(f"t_steps must be >= 1, got {t_steps}")
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise ValueError(
            f"need 0 < beta_min <= beta_max < 1, got ({beta_min}, {beta_max})"
        )
    if t_steps == 1:
        return NoiseSchedule((beta_min,))
    step = (beta_max - beta_min) / (t_steps - 1)
    return NoiseSchedule(tuple(beta_min + step * i for i in range(t_steps)))


@dataclass
class ForwardTrajectory:
    kind: ChainKind
    states: np.ndarray        # [T, M], states x^1..x^T
    noise_draws: np.ndarray   # [T, M], the eps drawn per step
    anchor_index: int | None = None
    partner_index: int | None = None


def forward_step(x_prev, partner0, beta_t, noise):
    """One forward mixing step; deterministic given the noise vector."""
    x_prev = np.asarray(x_prev, dtype=np.float64)
    partner0 = np.asarray(partner0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if not (x_prev.shape == partner0.shape == noise.shape):
        raise ShapeMismatchError(
            f"forward_step operands differ in shape: {x_prev.shape}, "
            f"{partner0.shape}, {noise.shape}"
        )
    if not 0.0 <= beta_t <= 1.0:
        raise ValueError(f"beta_t must lie in [0, 1], got {beta_t}")
    keep = np.sqrt(1.0 - beta_t)
    return keep * x_prev + (1.0 - keep) * partner0 + np.sqrt(beta_t) * noise


def forward_trajectory(anchor, partner, schedule, noise_std, rng,
                       anchor_index=None, partner_index=None):
    """Run the full forward process from anchor toward partner.

    The trajectory's kind is inferred from the labels: equal labels give the
    within-class process of that class, differing labels the across-class
    process from the anchor's class toward the partner's.
    """
    a = np.asarray(anchor.values, dtype=np.float64)
    p = np.asarray(partner.values, dtype=np.float64)
    if a.shape != p.shape:
        raise ShapeMismatchError(
            f"anchor length {a.shape} != partner length {p.shape}"
        )
    if noise_std < 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")
    kind = ChainKind(anchor.label, partner.label)
    t_steps = schedule.t_steps
    draws = rng.normal(0.0, noise_std, size=(t_steps, a.size)) if noise_std > 0 \
        else np.zeros((t_steps, a.size))
    states = np.empty((t_steps, a.size))
    prev = a
    for t, beta in enumerate(schedule.betas):
        prev = forward_step(prev, p, beta, draws[t])
        states[t] = prev
    return ForwardTrajectory(kind=kind, states=states, noise_draws=draws,
                             anchor_index=anchor_index, partner_index=partner_index)
