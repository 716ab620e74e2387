"""Fixed-step scenario engine wiring vehicles, sessions, and adversaries.

One scenario is a deterministic single-threaded run at dt steps: queued
messages are delivered (through the adversary's channel filter when one is
scripted), sessions react, controllers command accelerations, vehicles
integrate, and the verifier samples its rear sensor at the scheduled
instants.  Everything is a pure function of (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .acc import (AccParams, StalledCandidateError, compute_deadline,
                  desired_acceleration, smoothed_acceleration)
from .challenge import ChallengeConfig, ChallengeSet, build_checkpoint_space
from .crypto import CertificateAuthority, Credentials
from .kinematics import RangeSensor, VehicleState, integrate_step, measure_range
from .protocol import (CandidateSession, Envelope, MitmAdversary,
                       RecordedSet, VerifierSession)
from .security import RandomWalkModel, deadline_to_steps, walk_step

SCENARIO_KINDS = (
    "honest",
    "remote-no-follower",
    "remote-with-r",
    "mitm-known",
    "mitm-unknown",
    "traffic",
)


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario parameters; the defaults reproduce the evaluated setup:
    30 m/s platoon, 45 m reference gap, 30-60 m checkpoint range (M=51),
    dt=0.1 s, lam=0.4, gamma=0.3 m."""

    kind: str = "honest"
    v_v: float = 30.0            # verifier speed, m/s
    v_c: float = 30.0            # candidate speed, m/s
    d_ref: Optional[float] = None  # reference gap; default 1.5 * v_c
    g_min: float = 1.0           # checkpoint range lower time gap, s
    g_max: float = 2.0           # checkpoint range upper time gap, s
    rho: float = 0.3             # sensor resolution, m
    k: int = 5                   # interior challenges
    lam: float = 0.4
    tau: float = 0.5
    dt: float = 0.1
    gamma: float = 0.3
    epsilon: float = 0.5
    sensor_sigma: float = 0.0
    sensor_max_range: float = 150.0
    seed: int = 0
    deadline_policy: str = "acc-model"
    adjustment: str = "none"     # none | recompute
    start_delay: float = 1.0     # t0 lead-in after the challenge message, s
    clock_skew: float = 0.0      # candidate clock offset, s
    accel_limit: float = 4.0
    # traffic scenario
    lead_speed: float = 27.0     # slow vehicle ahead of the verifier, m/s
    lead_gap: float = 56.5       # its initial gap ahead of the verifier, m
    traffic_checkpoint: Optional[float] = None   # default d_ref - 3
    # independent follower (remote-with-r)
    walk_step_duration: float = 1.0
    # bookkeeping
    record_traces: bool = True
    max_sim_time: float = 900.0

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.adjustment not in ("none", "recompute"):
            raise ValueError(f"unsupported adjustment policy {self.adjustment!r}")
        if self.v_v <= 0 or self.v_c <= 0:
            raise ValueError("velocities must be positive")
        ref = self.reference_gap
        space = self.checkpoint_space()
        if not space.checkpoints[0] <= ref <= space.checkpoints[-1]:
            raise ValueError("d_ref must lie inside the checkpoint range")

    @property
    def reference_gap(self) -> float:
        return 1.5 * self.v_c if self.d_ref is None else self.d_ref

    def acc_params(self) -> AccParams:
        return AccParams(lam=self.lam, tau=self.tau, dt=self.dt,
                         gamma=self.gamma,
                         max_iters=max(600, int(60.0 / self.dt)))

    def challenge_config(self) -> ChallengeConfig:
        return ChallengeConfig(k=self.k, g_min=self.g_min, g_max=self.g_max,
                               rho=self.rho, gamma=self.gamma,
                               epsilon=self.epsilon,
                               deadline_policy=self.deadline_policy,
                               rng_seed=self.seed)

    def checkpoint_space(self):
        return build_checkpoint_space(self.v_v, self.g_min, self.g_max,
                                      self.rho)

    def sensor(self) -> RangeSensor:
        return RangeSensor(self.rho, self.sensor_sigma, self.sensor_max_range)

    def walk_model(self) -> RandomWalkModel:
        lower = self.g_min * self.v_v
        upper = self.g_max * self.v_v
        n = int(round((upper - lower) / self.rho)) + 1
        return RandomWalkModel(n, lower, upper)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    verdict: str                      # ACCEPT | REJECT
    verdict_reason: Optional[str]
    admitted_id: Optional[str]        # peer the verifier judged
    candidate_outcome: Optional[str]  # COMPLETED | ABORT | None
    candidate_reason: Optional[str]
    gamma: Optional[ChallengeSet]     # final (possibly adjusted) schedule
    original_gamma: Optional[ChallengeSet]
    recorded: Optional[RecordedSet]
    indicators: Tuple[bool, ...]
    verification_time: Optional[float]
    security_pass: Optional[bool]     # interior challenges, walk-state match
    required_times: Tuple[float, ...]  # per-leg settled arrival vs actual profile
    traces: List[tuple]               # (time, name, lane, pos, vel, acc, gap)
    terminal_events: List[object]
    message_log: List[tuple]          # (time, sender, recipient, wire bytes)

    def challenge_rows(self) -> List[tuple]:
        """Rows for challenges.csv: one per schedule entry."""
        if self.gamma is None:
            return []
        rows = []
        for i, entry in enumerate(self.gamma.entries):
            measured = self.recorded.measurements[i] if self.recorded else None
            ok = self.indicators[i] if i < len(self.indicators) else False
            rows.append((i, entry.distance, entry.deadline,
                         entry.absolute_time, measured, int(ok)))
        return rows


class _GapController:
    """Constant-time-gap regulator with the acceleration smoothing blend."""

    def __init__(self, params: AccParams):
        self.params = params
        self.prev_desired = 0.0

    def command(self, target: float, gap: float, v_self: float,
                v_ahead: float) -> float:
        if v_self <= 0 or v_ahead <= 0:
            raise StalledCandidateError("stationary vehicle with a pending gap target")
        t_gap = target / v_ahead
        spacing_error = t_gap * v_self - gap
        desired = desired_acceleration(t_gap, v_self - v_ahead, spacing_error,
                                       self.params.lam)
        applied = smoothed_acceleration(desired, self.prev_desired,
                                        self.params.dt, self.params.tau)
        self.prev_desired = desired
        return applied


class _CruiseGapController:
    """Cruise at a set speed, capped by gap regulation on a lead vehicle."""

    def __init__(self, params: AccParams, set_speed: float,
                 headway: float, speed_gain: float = 0.4):
        self.params = params
        self.set_speed = set_speed
        self.headway = headway
        self.speed_gain = speed_gain
        self.prev_desired = 0.0

    def command(self, gap: Optional[float], v_self: float,
                v_ahead: Optional[float]) -> float:
        desired = self.speed_gain * (self.set_speed - v_self)
        if gap is not None and v_ahead is not None and v_self > 0:
            spacing_error = self.headway * v_self - gap
            gap_desired = desired_acceleration(self.headway, v_self - v_ahead,
                                               spacing_error, self.params.lam)
            desired = min(desired, gap_desired)
        applied = smoothed_acceleration(desired, self.prev_desired,
                                        self.params.dt, self.params.tau)
        self.prev_desired = desired
        return applied


def _spawned_rngs(seed: int, n: int) -> List[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def run_scenario(config: ScenarioConfig,
                 deadline_cache: Optional[dict] = None) -> ScenarioResult:
    """Execute one scenario end to end; deterministic given (config, seed).

    deadline_cache optionally shares memoized policy deadlines across runs
    with identical controller parameters (bulk Monte Carlo episodes).
    """
    kind = config.kind
    dt = config.dt
    d_ref = config.reference_gap
    acc = config.acc_params()
    chal_cfg = config.challenge_config()
    space = config.checkpoint_space()
    sensor = config.sensor()
    rng_challenge, rng_walk, rng_sensor = _spawned_rngs(config.seed, 3)

    ca = CertificateAuthority()
    verifier_creds = ca.enroll("V")
    candidate_creds = ca.enroll("C")
    adversary_creds = ca.enroll("M")

    # --- vehicles ------------------------------------------------------
    vehicles: Dict[str, VehicleState] = {}
    verifier_start = 1000.0
    vehicles["V"] = VehicleState(verifier_start, config.v_v)
    physical_candidate = kind in ("honest", "traffic", "mitm-known",
                                  "mitm-unknown")
    if physical_candidate:
        vehicles["C"] = VehicleState(verifier_start - d_ref, config.v_c)
    if kind == "traffic":
        vehicles["L"] = VehicleState(verifier_start + config.lead_gap,
                                     config.lead_speed)

    walk_model = config.walk_model()
    walk_state: Optional[int] = None
    if kind == "remote-with-r":
        walk_state = int(rng_walk.integers(0, walk_model.n_states))
        vehicles["R"] = VehicleState(
            verifier_start - walk_model.distance(walk_state), config.v_v)

    # --- sessions ------------------------------------------------------
    def verifier_velocity() -> float:
        return vehicles["V"].velocity

    def verifier_measure() -> Optional[float]:
        others = [v for name, v in vehicles.items() if name != "V"]
        return measure_range(vehicles["V"], others, sensor, rng_sensor)

    fixed = None
    if kind == "traffic":
        # single pinned checkpoint so the braking study is reproducible
        checkpoint = config.traffic_checkpoint
        fixed = [d_ref - 3.0 if checkpoint is None else checkpoint]

    verifier = VerifierSession(
        verifier_creds, ca.public_key, space, chal_cfg, acc, d_ref,
        rng_challenge, verifier_velocity, verifier_measure,
        start_delay=config.start_delay, adjustment=config.adjustment,
        deadline_cache=deadline_cache if deadline_cache is not None else {},
        fixed_checkpoints=fixed,
    )

    if kind in ("remote-no-follower", "remote-with-r"):
        joiner_creds = adversary_creds
    else:
        joiner_creds = candidate_creds

    known_verifier = kind != "mitm-unknown"
    candidate = CandidateSession(
        joiner_creds, ca.public_key, d_ref,
        verifier_id="V" if known_verifier else None,
        expected_verifier_key=(verifier_creds.identity.public_key
                               if kind in ("honest", "traffic", "mitm-known",
                                           "remote-no-follower",
                                           "remote-with-r") else None),
        clock_skew=config.clock_skew,
    )

    adversary = None
    if kind in ("mitm-known", "mitm-unknown"):
        adversary = MitmAdversary(adversary_creds, ca.public_key, "V",
                                  candidate_creds.identity)

    sessions = {verifier_creds.id: verifier, candidate.creds.id: candidate}

    # --- controllers ---------------------------------------------------
    candidate_ctl = _GapController(acc) if physical_candidate else None
    verifier_ctl = (_CruiseGapController(acc, config.v_v, 1.5)
                    if kind == "traffic" else None)

    # --- run loop ------------------------------------------------------
    pending: List[Tuple[int, Envelope]] = [(1, e) for e in candidate.start()]
    traces: List[tuple] = []
    message_log: List[tuple] = []
    walk_plan: List[float] = []          # pending step instants
    walk_states_at: Dict[int, int] = {}  # entry index -> walk state at measure
    seen_gamma: Optional[ChallengeSet] = None
    velocity_log: List[float] = []       # verifier speed per tick
    measured_ticks: List[int] = []

    def build_walk_plan(gamma: ChallengeSet) -> List[float]:
        plan = []
        prev_t = gamma.t0
        for entry in gamma.entries[1:]:
            steps = deadline_to_steps(entry.absolute_time - prev_t,
                                      config.walk_step_duration)
            width = (entry.absolute_time - prev_t) / steps
            plan.extend(prev_t + width * (j + 1) for j in range(steps))
            prev_t = entry.absolute_time
        return plan

    tick = 0
    horizon = min(config.max_sim_time, 60.0)
    abort_sent = False
    while True:
        now = tick * dt

        # 1. deliver queued messages, oldest first
        due = [env for t, env in pending if t <= tick]
        pending = [(t, env) for t, env in pending if t > tick]
        for env in due:
            injections: List[Envelope] = []
            if adversary is not None:
                env, injections = adversary.filter(env)
            pending.extend((tick + 1, e) for e in injections)
            if env is None:
                continue
            message_log.append((now, env.sender, env.recipient,
                                env.payload.to_bytes()))
            targets = (list(sessions.values()) if env.recipient == "*"
                       else [sessions.get(env.recipient)])
            for session in targets:
                if session is None or session.creds.id == env.sender:
                    continue
                out = session.on_message(env, now)
                pending.extend((tick + 1, e) for e in out)

        # 2. walk steps due at this instant
        if walk_state is not None:
            while walk_plan and walk_plan[0] <= now + dt / 2:
                walk_plan.pop(0)
                walk_state = walk_step(walk_state, walk_model.n_states,
                                       rng_walk.random())
            vehicles["R"] = replace(
                vehicles["R"],
                position=vehicles["V"].position - walk_model.distance(walk_state))

        # 3. sessions observe the tick (verifier measures/recomputes here)
        before = len(verifier.readings)
        out = verifier.on_tick(now)
        pending.extend((tick + 1, e) for e in out)
        if len(verifier.readings) > before:
            for idx in range(before, len(verifier.readings)):
                measured_ticks.append(tick)
                if walk_state is not None:
                    walk_states_at[idx] = walk_state
        candidate.on_tick(now)
        if verifier.gamma is not None and seen_gamma is not verifier.gamma:
            seen_gamma = verifier.gamma
            horizon = min(config.max_sim_time,
                          seen_gamma.end_time + 2.0)
            if walk_state is not None:
                walk_plan = [t for t in build_walk_plan(seen_gamma)
                             if t > now + dt / 2]
        velocity_log.append(vehicles["V"].velocity)

        # 4. controllers and integration
        accels: Dict[str, float] = {}
        if kind == "traffic":
            lead = vehicles["L"]
            gap_lead = lead.position - vehicles["V"].position
            accels["V"] = verifier_ctl.command(gap_lead, vehicles["V"].velocity,
                                               lead.velocity)
            accels["L"] = 0.0
        else:
            accels["V"] = 0.0
        if physical_candidate and "C" in vehicles:
            target = candidate.target_distance(now)
            gap = vehicles["V"].position - vehicles["C"].position
            try:
                accels["C"] = candidate_ctl.command(
                    target, gap, vehicles["C"].velocity,
                    vehicles["V"].velocity)
            except StalledCandidateError:
                candidate.abort_maneuver("stall")
                accels["C"] = 0.0
            if not abort_sent and gap < config.g_min * vehicles["V"].velocity - \
                    2.0 * config.gamma and candidate.gamma is not None:
                candidate.abort_maneuver("maneuver-abort")
                abort_sent = True

        if config.record_traces:
            for name in sorted(vehicles):
                v = vehicles[name]
                gap = vehicles["V"].position - v.position if name != "V" else 0.0
                traces.append((now, name, v.lane, v.position, v.velocity,
                               accels.get(name, 0.0), gap))

        if verifier.terminal is not None:
            break
        if now >= horizon:
            break

        for name, a in accels.items():
            vehicles[name] = integrate_step(vehicles[name], a, dt,
                                            config.accel_limit)
        if walk_state is not None:
            vehicles["R"] = replace(
                vehicles["R"],
                position=vehicles["V"].position - walk_model.distance(walk_state))
        tick += 1

    # --- results ---------------------------------------------------------
    gamma = verifier.gamma
    recorded = verifier.recorded
    indicators = verifier.result.indicators if verifier.result else tuple()
    verdict = verifier.terminal.outcome if verifier.terminal else "REJECT"
    reason = verifier.terminal.reason if verifier.terminal else "timeout"

    security_pass = None
    if kind == "remote-with-r" and gamma is not None and recorded is not None:
        interior = range(1, len(gamma.entries) - 1)
        security_pass = all(
            idx in walk_states_at and
            walk_states_at[idx] == walk_model.nearest_state(
                gamma.entries[idx].distance)
            for idx in interior
        )

    required = []
    if gamma is not None and recorded is not None and kind == "traffic":
        for i in range(1, len(gamma.entries)):
            start_tick = int(round((gamma.entries[i - 1].absolute_time) / dt))
            profile = velocity_log[min(start_tick, len(velocity_log) - 1):]
            if not profile:
                profile = [velocity_log[-1]]
            result = compute_deadline(
                gamma.entries[i - 1].distance, gamma.entries[i].distance,
                profile[0], profile[0], acc, verifier_profile=profile,
                settle_to_end=True)
            required.append(result.deadline)

    events = [e for e in (verifier.terminal, candidate.terminal) if e]
    return ScenarioResult(
        config=config,
        verdict=verdict,
        verdict_reason=reason,
        admitted_id=verifier.peer.id if verifier.peer else None,
        candidate_outcome=candidate.terminal.outcome if candidate.terminal else None,
        candidate_reason=candidate.terminal.reason if candidate.terminal else None,
        gamma=gamma,
        original_gamma=verifier.original_gamma,
        recorded=recorded,
        indicators=indicators,
        verification_time=(gamma.end_time - gamma.t0) if gamma else None,
        security_pass=security_pass,
        required_times=tuple(required),
        traces=traces,
        terminal_events=events,
        message_log=message_log,
    )
