"""Gap-regulating cruise controller and verifier-side deadline computation.

The controller regulates the following distance toward a commanded checkpoint
through a constant-time-gap law: for a checkpoint d and verifier speed v_V the
gap time is T = d / v_V, the spacing error is e = T * v_C - gap, and the
desired acceleration is -(1/T) * (dv + lam * e) with dv the relative velocity.
The applied acceleration blends the current and previous desired values,
which models actuation smoothing.  Iterating the recurrence until the signed
distance error to the checkpoint stays inside the tolerance band yields the
deadline the verifier grants for that checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence


class StalledCandidateError(RuntimeError):
    """Candidate (or verifier) speed reached zero while a checkpoint is pending."""


class NonConvergenceError(RuntimeError):
    """The deadline recurrence failed to settle within max_iters steps."""


@dataclass(frozen=True)
class AccParams:
    """Controller and deadline-search parameters."""

    lam: float = 0.4       # convergence gain, 1/s
    tau: float = 0.5       # acceleration smoothing time constant, s
    dt: float = 0.1        # update step, s
    gamma: float = 0.3     # checkpoint distance tolerance, m
    max_iters: int = 600   # safety cap on deadline iterations (60 s at dt=0.1)
    hold_steps: int = 10   # steps the error must stay inside gamma to settle

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.max_iters <= 0:
            raise ValueError("max_iters must be positive")


@dataclass(frozen=True)
class ControllerState:
    """One step of the gap-regulation recurrence.

    delta is the signed physical distance error to the checkpoint
    (checkpoint minus actual gap); prev_accel is the previous step's
    desired-acceleration input to the smoothing blend; applied_accel is the
    acceleration actually realized at this step.
    """

    prev_accel: float
    delta: float
    candidate_velocity: float
    verifier_velocity: float
    applied_accel: float = 0.0


@dataclass(frozen=True)
class DeadlineResult:
    deadline: float                  # s, dt * first settled step
    trajectory: tuple                # per-step (delta, candidate_velocity, applied_accel)
    converged: bool


def desired_acceleration(gap_time: float, rel_velocity: float, delta: float,
                         lam: float) -> float:
    """Constant-time-gap control law: -(1/T) * (dv + lam * delta)."""
    if gap_time <= 0:
        raise ValueError("gap time must be positive")
    return -(rel_velocity + lam * delta) / gap_time


def smoothed_acceleration(desired: float, prev: float, dt: float,
                          tau: float) -> float:
    """Blend the current command with the previous step's input."""
    if tau <= 0 or dt <= 0:
        raise ValueError("tau and dt must be positive")
    beta = dt / (tau + dt)
    return beta * desired + (1.0 - beta) * prev


def controller_step(state: ControllerState, checkpoint: float,
                    params: AccParams) -> ControllerState:
    """Advance the recurrence one step toward the checkpoint.

    The gap time T = checkpoint / verifier_velocity is re-evaluated each step
    from the verifier speed, so the regulated gap converges to the checkpoint
    at whatever speed the platoon settles on.
    """
    if checkpoint <= 0:
        raise ValueError("checkpoint distance must be positive")
    if state.candidate_velocity <= 0:
        raise StalledCandidateError("candidate velocity is zero with a pending checkpoint")
    if state.verifier_velocity <= 0:
        raise StalledCandidateError("verifier velocity is zero with a pending checkpoint")

    v_c = state.candidate_velocity
    v_v = state.verifier_velocity
    gap = checkpoint - state.delta
    t_gap = checkpoint / v_v
    spacing_error = t_gap * v_c - gap
    a_des = desired_acceleration(t_gap, v_c - v_v, spacing_error, params.lam)
    a = smoothed_acceleration(a_des, state.prev_accel, params.dt, params.tau)
    gain = v_c * params.dt + 0.5 * a * params.dt ** 2
    delta = state.delta + gain - v_v * params.dt
    velocity = max(0.0, v_c + a * params.dt)
    return ControllerState(
        prev_accel=a_des,
        delta=delta,
        candidate_velocity=velocity,
        verifier_velocity=v_v,
        applied_accel=a,
    )


def compute_deadline(
    d_ref: float,
    checkpoint: float,
    v_c: float,
    v_v: float,
    params: AccParams,
    verifier_profile: Optional[Sequence[float]] = None,
    settle_to_end: bool = False,
) -> DeadlineResult:
    """Predict the time an honest controller needs to reach the checkpoint.

    Starts from delta = checkpoint - d_ref at matched speeds and iterates the
    recurrence until the distance error stays inside gamma for hold_steps
    consecutive steps; the deadline is dt times the first step of that run.
    verifier_profile optionally supplies the verifier speed per step (last
    value held), which is how deadlines are re-derived when the verifier's
    velocity changes mid-challenge.  settle_to_end demands the error stay
    inside the band through the whole horizon instead of hold_steps, which
    rejects the transient pass-through a braking verifier induces.
    """
    if checkpoint <= 0 or d_ref <= 0:
        raise ValueError("distances must be positive")
    if v_c <= 0 or v_v <= 0:
        raise ValueError("velocities must be positive")

    state = ControllerState(
        prev_accel=0.0,
        delta=checkpoint - d_ref,
        candidate_velocity=v_c,
        verifier_velocity=v_v,
    )
    trajectory = [(state.delta, state.candidate_velocity, 0.0)]
    if abs(state.delta) < params.gamma:
        return DeadlineResult(0.0, tuple(trajectory), True)

    deltas = [state.delta]
    limit = params.max_iters + params.hold_steps
    for n in range(1, limit + 1):
        if verifier_profile is not None:
            idx = min(n - 1, len(verifier_profile) - 1)
            state = ControllerState(
                state.prev_accel, state.delta, state.candidate_velocity,
                verifier_profile[idx], state.applied_accel,
            )
        state = controller_step(state, checkpoint, params)
        deltas.append(state.delta)
        trajectory.append((state.delta, state.candidate_velocity, state.applied_accel))

    if settle_to_end:
        last_violation = max((i for i, x in enumerate(deltas)
                              if abs(x) >= params.gamma), default=0)
        n = last_violation + 1
        if n <= params.max_iters:
            return DeadlineResult(n * params.dt, tuple(trajectory[:n + 1]), True)
    else:
        for n in range(1, params.max_iters + 1):
            window = deltas[n:n + params.hold_steps + 1]
            if all(abs(x) < params.gamma for x in window):
                return DeadlineResult(n * params.dt, tuple(trajectory[:n + 1]),
                                      True)
    raise NonConvergenceError(
        f"no settled arrival within {params.max_iters} steps "
        f"({d_ref}->{checkpoint} m at v={v_v} m/s)"
    )


def simple_deadline(d: float, d_ref: float, v_rel: float, epsilon: float) -> float:
    """Kinematic deadline: |d - d_ref| / v_rel + epsilon."""
    if v_rel <= 0:
        raise ValueError("relative velocity must be positive")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    return abs(d - d_ref) / v_rel + epsilon


def deadline_with_profile(
    d_prev: float,
    checkpoint: float,
    v_start: float,
    profile: Sequence[float],
    params: AccParams,
) -> float:
    """Deadline re-derived from an observed verifier speed profile."""
    result = compute_deadline(d_prev, checkpoint, v_start, profile[0] if profile else v_start,
                              params, verifier_profile=profile)
    return result.deadline
