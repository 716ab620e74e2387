"""Longitudinal vehicle motion and the rearward ranging sensor."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Symmetric actuator bound applied to every acceleration command [m/s^2].
DEFAULT_ACCEL_LIMIT = 4.0


class InvalidStateError(ValueError):
    """Raised when a kinematic update receives non-finite inputs."""


@dataclass(frozen=True)
class VehicleState:
    """Longitudinal state of one vehicle at a simulation tick."""

    position: float           # m along the road axis, increasing with travel
    velocity: float           # m/s, never negative
    acceleration: float = 0.0  # m/s^2, last applied command after clamping
    lane: int = 0


@dataclass(frozen=True)
class RangeSensor:
    """Rear-facing distance sensor of the verifier."""

    resolution: float = 0.3   # quantization step rho, m
    noise_sigma: float = 0.0  # additive Gaussian noise before quantization, m
    max_range: float = 150.0  # m

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("sensor resolution must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")
        if self.max_range <= 0:
            raise ValueError("max range must be positive")


@dataclass
class RouteTrace:
    """Time-ordered (position, lane, time) samples of one vehicle."""

    samples: list = field(default_factory=list)

    def append(self, time: float, position: float, lane: int) -> None:
        if self.samples and time <= self.samples[-1][2]:
            raise ValueError(
                f"trace timestamps must be strictly increasing "
                f"(got {time} after {self.samples[-1][2]})"
            )
        self.samples.append((position, lane, time))

    def __len__(self) -> int:
        return len(self.samples)


def integrate_step(
    state: VehicleState,
    accel_cmd: float,
    dt: float,
    accel_limit: float = DEFAULT_ACCEL_LIMIT,
) -> VehicleState:
    """Advance one vehicle by one tick under a commanded acceleration.

    The command is clamped to the actuator bound and, when braking, limited
    so the vehicle stops instead of reversing within the tick.  Position
    advances ballistically: x' = x + v*dt + a*dt^2/2.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not all(map(math.isfinite, (state.position, state.velocity, accel_cmd))):
        raise InvalidStateError("non-finite kinematic input")

    a = max(-accel_limit, min(accel_limit, accel_cmd))
    if state.velocity + a * dt < 0:
        a = -state.velocity / dt  # stop within the tick, never reverse
    position = state.position + state.velocity * dt + 0.5 * a * dt * dt
    velocity = max(0.0, state.velocity + a * dt)
    return VehicleState(position, velocity, a, state.lane)


def measure_range(verifier, candidates, sensor: RangeSensor, rng=None):
    """Distance to the nearest vehicle behind the verifier in its lane.

    Returns the noisy, quantized reading in meters, or None when no vehicle
    is behind within the sensor's range.  The RNG is consulted only when
    noise_sigma > 0, so noiseless runs do not disturb the random stream.
    """
    nearest = None
    for other in candidates:
        if other.lane != verifier.lane:
            continue
        gap = verifier.position - other.position
        if gap <= 0 or gap > sensor.max_range:
            continue
        if nearest is None or gap < nearest:
            nearest = gap
    if nearest is None:
        return None
    if sensor.noise_sigma > 0:
        if rng is None:
            raise ValueError("rng required when noise_sigma > 0")
        nearest += rng.normal(0.0, sensor.noise_sigma)
    return round(nearest / sensor.resolution) * sensor.resolution
