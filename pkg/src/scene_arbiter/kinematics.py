"""Single-track (bicycle) kinematics and seeded control sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import wrap_angle

STRAIGHT_TAN_EPS = 1e-9


class InvalidStep(ValueError):
    """Raised for a non-positive step or a control outside the limits."""


@dataclass(frozen=True)
class KinematicState:
    x: float
    y: float
    heading: float
    speed: float
    wheelbase: float = 2.7

    def __post_init__(self):
        if self.wheelbase <= 0:
            raise ValueError("wheelbase must be positive")
        if self.speed < 0:
            raise ValueError("reverse driving is not modelled (speed < 0)")

    def as_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "heading": self.heading,
                "speed": self.speed, "wheelbase": self.wheelbase}


@dataclass(frozen=True)
class ControlInput:
    steering: float = 0.0
    accel: float = 0.0


@dataclass(frozen=True)
class ControlLimits:
    max_steering: float = 0.5
    max_accel: float = 4.0

    def clip(self, u: ControlInput) -> ControlInput:
        return ControlInput(
            steering=min(max(u.steering, -self.max_steering), self.max_steering),
            accel=min(max(u.accel, -self.max_accel), self.max_accel),
        )

    def admits(self, u: ControlInput) -> bool:
        return abs(u.steering) <= self.max_steering and abs(u.accel) <= self.max_accel


DEFAULT_LIMITS = ControlLimits()


def step_single_track(s: KinematicState, u: ControlInput, dt: float,
                      limits: ControlLimits | None = DEFAULT_LIMITS) -> KinematicState:
    """Advance the single-track model by one constant-control step.

    The update is exact for constant steering: the rear axle moves along a
    circular arc of radius ``wheelbase / tan(steering)`` (a straight line for
    zero steering), so the vehicle never slides sideways.  Distance travelled
    uses the mean of start and end speed; speed is floored at zero.
    """
    if not dt > 0:
        raise InvalidStep(f"dt must be positive, got {dt}")
    if limits is not None and not limits.admits(u):
        raise InvalidStep(f"control {u} outside limits {limits}")
    v_next = max(0.0, s.speed + u.accel * dt)
    dist = 0.5 * (s.speed + v_next) * dt
    if dist == 0.0:
        return KinematicState(s.x, s.y, s.heading, v_next, s.wheelbase)
    tan_d = math.tan(u.steering)
    th = s.heading
    if abs(tan_d) < STRAIGHT_TAN_EPS:
        x = s.x + dist * math.cos(th)
        y = s.y + dist * math.sin(th)
        th_next = th
    else:
        dth = dist * tan_d / s.wheelbase
        th_next = th + dth
        # chord of the arc; avoids cancellation in R * (sin a - sin b) for huge R
        half = 0.5 * dth
        chord = dist * math.sin(half) / half
        x = s.x + chord * math.cos(th + half)
        y = s.y + chord * math.sin(th + half)
    return KinematicState(x, y, wrap_angle(th_next), v_next, s.wheelbase)


class RandomSource:
    """Counter-based (Philox) generator keyed by a 64-bit seed.

    ``child(key)`` derives an independent stream deterministically, so each
    participant can own its stream regardless of creation order.
    """

    def __init__(self, seed: int, _spawn_key: tuple[int, ...] = ()):
        if not 0 <= seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        self.seed = seed
        self.spawn_key = _spawn_key
        seq = np.random.SeedSequence(seed, spawn_key=_spawn_key)
        self.generator = np.random.Generator(np.random.Philox(seq))

    def child(self, key: int) -> "RandomSource":
        return RandomSource(self.seed, self.spawn_key + (key,))

    def uniform(self, low: float, high: float, size=None):
        return self.generator.uniform(low, high, size)


@dataclass(frozen=True)
class ControlBounds:
    """Support of the uniform control sampler.

    Steering-rate is sampled per step; target speed per episode unless
    ``speed_per_step`` is set.
    """
    steering_rate_min: float = -0.1
    steering_rate_max: float = 0.1
    speed_min: float = 8.0
    speed_max: float = 14.0
    max_steering: float = 0.5
    dt: float = 0.1
    speed_per_step: bool = False

    def __post_init__(self):
        if self.steering_rate_min > self.steering_rate_max or self.speed_min > self.speed_max:
            raise ValueError("empty control bounds")
        if self.speed_min < 0 or self.dt <= 0 or self.max_steering < 0:
            raise ValueError("invalid control bounds")


@dataclass(frozen=True)
class ControlSequence:
    steering_rates: np.ndarray
    steering: np.ndarray
    target_speeds: np.ndarray

    def __len__(self):
        return len(self.steering)


def sample_controls(rng: RandomSource, bounds: ControlBounds, n: int,
                    initial_steering: float = 0.0) -> ControlSequence:
    if n < 1:
        raise ValueError("n must be >= 1")
    rates = rng.uniform(bounds.steering_rate_min, bounds.steering_rate_max, n)
    if bounds.speed_per_step:
        speeds = rng.uniform(bounds.speed_min, bounds.speed_max, n)
    else:
        speeds = np.full(n, rng.uniform(bounds.speed_min, bounds.speed_max))
    steering = np.empty(n)
    delta = initial_steering
    for i, r in enumerate(rates):
        delta = min(max(delta + r * bounds.dt, -bounds.max_steering), bounds.max_steering)
        steering[i] = delta
    return ControlSequence(rates, steering, speeds)
