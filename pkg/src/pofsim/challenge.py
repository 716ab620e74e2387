"""Checkpoint-space construction, challenge-set generation, and deadline
adjustment under verifier velocity changes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .acc import AccParams, compute_deadline, simple_deadline

# Tolerance for float lattice arithmetic when sizing the checkpoint grid.
_GRID_EPS = 1e-9


class AdjustmentTimeoutError(RuntimeError):
    """Verifier velocity never stabilized within the observed trace."""


@dataclass(frozen=True)
class CheckpointSpace:
    """Discrete checkpoint distances the verifier draws challenges from."""

    checkpoints: tuple          # meters, ascending, spaced by 2*rho
    spacing: float              # meters, = 2*rho
    lower: float                # g_min * v_V
    upper: float                # g_max * v_V

    @property
    def size(self) -> int:
        return len(self.checkpoints)


@dataclass(frozen=True)
class ChallengeEntry:
    distance: float         # checkpoint gap, m
    deadline: float         # maneuver allowance granted for this entry, s
    absolute_time: float    # schedule instant the verifier measures at, s


@dataclass(frozen=True)
class ChallengeSet:
    """Ordered challenge schedule bracketed by the reference-gap entries."""

    entries: tuple

    def __post_init__(self):
        if len(self.entries) < 2:
            raise ValueError("challenge set needs the two boundary entries")
        times = [e.absolute_time for e in self.entries]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("absolute times must be strictly increasing")
        if self.entries[0].distance != self.entries[-1].distance:
            raise ValueError("boundary entries must share the reference gap")

    @property
    def k(self) -> int:
        return len(self.entries) - 2

    @property
    def t0(self) -> float:
        return self.entries[0].absolute_time

    @property
    def end_time(self) -> float:
        return self.entries[-1].absolute_time

    def interior(self) -> tuple:
        return self.entries[1:-1]


@dataclass(frozen=True)
class ChallengeConfig:
    """Knobs for challenge generation (defaults follow the simulated setup)."""

    k: int = 5                      # number of interior challenges
    g_min: float = 1.0              # minimum safety time gap, s
    g_max: float = 2.0              # maximum time gap, s
    rho: float = 0.3                # radar resolution, m
    gamma: float = 0.3              # checkpoint tolerance, m
    epsilon: float = 0.5            # per-challenge schedule slack, s
    deadline_policy: str = "acc-model"   # acc-model | simple
    v_rel: float = 1.0              # assumed speed differential, simple policy
    rng_seed: int = 0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if not 0 < self.g_min < self.g_max:
            raise ValueError("need 0 < g_min < g_max")
        if self.deadline_policy not in ("acc-model", "simple"):
            raise ValueError(f"unknown deadline policy {self.deadline_policy!r}")


def build_checkpoint_space(v_v: float, g_min: float, g_max: float,
                           rho: float) -> CheckpointSpace:
    """Divide [g_min*v_V, g_max*v_V] into checkpoints spaced 2*rho apart.

    The count is M = floor((g_max - g_min) * v_V / (2*rho)) + 1.
    """
    if v_v <= 0:
        raise ValueError("verifier velocity must be positive")
    if not 0 < g_min < g_max:
        raise ValueError("need 0 < g_min < g_max")
    if rho <= 0:
        raise ValueError("rho must be positive")
    lower = g_min * v_v
    upper = g_max * v_v
    m = math.floor((upper - lower) / (2.0 * rho) + _GRID_EPS) + 1
    if m < 1:
        raise ValueError("degenerate checkpoint range")
    points = tuple(lower + 2.0 * rho * i for i in range(m))
    return CheckpointSpace(points, 2.0 * rho, lower, upper)


def _policy_deadline(d_prev: float, d: float, v_v: float,
                     config: ChallengeConfig, acc: AccParams,
                     cache: Optional[dict] = None) -> float:
    """Maneuver allowance from one checkpoint to the next, without slack."""
    if config.deadline_policy == "simple":
        return simple_deadline(d, d_prev, config.v_rel, 0.0)
    key = (d_prev, d, v_v)
    if cache is not None and key in cache:
        return cache[key]
    value = compute_deadline(d_prev, d, v_v, v_v, acc).deadline
    if cache is not None:
        cache[key] = value
    return value


def schedule_checkpoints(
    checkpoints: Sequence[float],
    config: ChallengeConfig,
    d_ref: float,
    v_v: float,
    acc: AccParams,
    t0: float = 0.0,
    deadline_cache: Optional[dict] = None,
) -> ChallengeSet:
    """Build the bracketed schedule for an explicit checkpoint sequence.

    The deadline for challenge k is computed from checkpoint k-1 (d_ref for
    k=1) under the configured policy; the verifier assumes the candidate
    moves at its own current velocity.  Absolute times accumulate from t0
    with epsilon slack added to every leg, including the final recovery to
    d_ref.
    """
    entries = [ChallengeEntry(d_ref, 0.0, t0)]
    prev_d = d_ref
    now = t0
    for d in list(checkpoints) + [d_ref]:
        allowance = _policy_deadline(prev_d, d, v_v, config, acc, deadline_cache)
        now += allowance + config.epsilon
        entries.append(ChallengeEntry(d, allowance, now))
        prev_d = d
    return ChallengeSet(tuple(entries))


def generate_challenges(
    space: CheckpointSpace,
    config: ChallengeConfig,
    d_ref: float,
    v_v: float,
    acc: AccParams,
    rng,
    t0: float = 0.0,
    deadline_cache: Optional[dict] = None,
) -> ChallengeSet:
    """Draw K checkpoints uniformly (repeats allowed) and schedule deadlines."""
    if not space.checkpoints[0] <= d_ref <= space.checkpoints[-1]:
        raise ValueError("d_ref must lie inside the checkpoint range")
    draws = [space.checkpoints[int(i)]
             for i in rng.integers(0, space.size, size=config.k)]
    return schedule_checkpoints(draws, config, d_ref, v_v, acc, t0,
                                deadline_cache)


def _window_velocities(velocities: Sequence[float], dt: float, t0: float,
                       start: float, end: float) -> list:
    """Slice a t0-anchored, dt-sampled velocity trace to [start, end]."""
    i0 = max(0, int(round((start - t0) / dt)))
    i1 = min(len(velocities), int(round((end - t0) / dt)) + 1)
    return list(velocities[i0:i1])


def _stabilization_time(velocities: Sequence[float], dt: float, t0: float,
                        after: float, tol: float, window: float) -> float:
    """First instant >= after where speed varies less than tol over window."""
    steps = max(1, int(round(window / dt)))
    start = max(0, int(round((after - t0) / dt)))
    for i in range(start, len(velocities) - steps):
        seg = velocities[i:i + steps + 1]
        if max(seg) - min(seg) < tol:
            return t0 + i * dt
    raise AdjustmentTimeoutError("verifier velocity never stabilized in the trace")


def adjust_deadlines(
    challenge_set: ChallengeSet,
    velocities: Sequence[float],
    acc: AccParams,
    policy: str = "recompute",
    epsilon: float = 0.5,
    disturb_tol: float = 0.5,
    stability_tol: float = 0.1,
    stability_window: float = 1.0,
) -> ChallengeSet:
    """Rebuild the schedule after observed verifier velocity changes.

    velocities samples the verifier speed at acc.dt steps starting at the
    schedule's t0.  A challenge window is disturbed when the speed departs
    from its window-start value by more than disturb_tol.  Under the
    "recompute" policy the disturbed deadline is re-derived by re-running the
    maneuver recurrence against the observed profile; under "repeat" the
    challenge restarts once the speed has stabilized (variation below
    stability_tol across stability_window) and its deadline is recomputed at
    the stabilized speed.  Subsequent entries shift accordingly.
    """
    if policy not in ("recompute", "repeat"):
        raise ValueError(f"unknown adjustment policy {policy!r}")
    if not velocities:
        raise ValueError("velocity trace is empty")

    entries = [challenge_set.entries[0]]
    t0 = challenge_set.t0
    prev = challenge_set.entries[0]
    prev_end = t0
    shift = 0.0
    for entry in challenge_set.entries[1:]:
        window_start = prev_end
        window_end = entry.absolute_time + shift
        profile = _window_velocities(velocities, acc.dt, t0, window_start, window_end)
        if not profile:
            profile = [velocities[-1]]
        disturbed = max(profile) - min(profile) > disturb_tol
        if not disturbed:
            new_entry = ChallengeEntry(entry.distance, entry.deadline,
                                       entry.absolute_time + shift)
        elif policy == "recompute":
            v0 = profile[0]
            tail = _window_velocities(velocities, acc.dt, t0, window_start,
                                      t0 + (len(velocities) - 1) * acc.dt)
            allowance = compute_deadline(prev.distance, entry.distance, v0, v0,
                                         acc, verifier_profile=tail,
                                         settle_to_end=True).deadline
            new_time = window_start + allowance + epsilon
            new_entry = ChallengeEntry(entry.distance, allowance, new_time)
            shift = new_time - entry.absolute_time
        else:  # repeat
            onset_idx = next(i for i, v in enumerate(profile)
                             if abs(v - profile[0]) > disturb_tol)
            onset = window_start + onset_idx * acc.dt
            resume = _stabilization_time(velocities, acc.dt, t0, onset,
                                         stability_tol, stability_window)
            idx = min(len(velocities) - 1, int(round((resume - t0) / acc.dt)))
            v_stable = velocities[idx]
            allowance = compute_deadline(prev.distance, entry.distance,
                                         v_stable, v_stable, acc).deadline
            new_time = resume + allowance + epsilon
            new_entry = ChallengeEntry(entry.distance, allowance, new_time)
            shift = new_time - entry.absolute_time
        entries.append(new_entry)
        prev = new_entry
        prev_end = new_entry.absolute_time
    return ChallengeSet(tuple(entries))
