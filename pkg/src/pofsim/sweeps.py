"""Parameter sweeps, the security Monte Carlo, and CSV emission.

CSV schemas (one header row, floats at 9 significant digits):

  traces.csv     time,vehicle,lane,position,velocity,acceleration,gap
  challenges.csv index,distance,deadline,absolute_time,measured,indicator
  sweep.csv      parameter,value,seeds,mean_time,std_time,pass_rate
  security.csv   k,trials,empirical,empirical_se,closed_form,exact,
                 lemma1_bound,steady_state
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .challenge import build_checkpoint_space
from .scenario import ScenarioConfig, ScenarioResult, run_scenario
from .security import (deadline_to_steps, lemma1_bound, passing_probability,
                       schedule_exact_passing_probability, steady_state_approx)

SWEEP_PARAMETERS = ("K", "M", "lambda", "gamma")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def write_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_traces_csv(path, result: ScenarioResult) -> None:
    write_csv(path,
              ("time", "vehicle", "lane", "position", "velocity",
               "acceleration", "gap"),
              result.traces)


def write_challenges_csv(path, result: ScenarioResult) -> None:
    write_csv(path,
              ("index", "distance", "deadline", "absolute_time", "measured",
               "indicator"),
              result.challenge_rows())


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    rows: tuple     # (value, seeds, mean_time, std_time, pass_rate)

    def csv_rows(self) -> List[tuple]:
        return [(self.parameter,) + row for row in self.rows]


def _config_for(base: ScenarioConfig, parameter: str, value: float) -> ScenarioConfig:
    if parameter == "K":
        return replace(base, k=int(value))
    if parameter == "lambda":
        return replace(base, lam=float(value))
    if parameter == "gamma":
        return replace(base, gamma=float(value))
    if parameter == "M":
        # widen the upper time gap so the grid holds exactly M checkpoints
        m = int(value)
        if m < 1:
            raise ValueError("M must be >= 1")
        g_max = base.g_min + (m - 1) * 2.0 * base.rho / base.v_v
        cfg = replace(base, g_max=g_max)
        space = cfg.checkpoint_space()
        if space.size != m:
            raise ValueError(f"could not realize M={m} (got {space.size})")
        return cfg
    raise ValueError(f"unknown sweep parameter {parameter!r} "
                     f"(one of {SWEEP_PARAMETERS})")


def run_sweep(base: ScenarioConfig, parameter: str, grid: Sequence[float],
              seeds: int = 30) -> SweepResult:
    """Mean verification time, its standard deviation, and the pass rate per
    grid point, over `seeds` independent scenario runs each."""
    if not grid:
        raise ValueError("sweep grid is empty")
    if seeds < 1:
        raise ValueError("need at least one seed")
    rows = []
    for value in grid:
        cfg = _config_for(base, parameter, value)
        times = []
        passes = 0
        for i in range(seeds):
            result = run_scenario(replace(cfg, seed=base.seed + i,
                                          record_traces=False))
            if result.verification_time is not None:
                times.append(result.verification_time)
            passes += result.verdict == "ACCEPT"
        mean = sum(times) / len(times) if times else float("nan")
        std = (sum((t - mean) ** 2 for t in times) / len(times)) ** 0.5 \
            if times else float("nan")
        rows.append((value, seeds, mean, std, passes / seeds))
    return SweepResult(parameter, tuple(rows))


def sweep_csv_rows(result: SweepResult) -> List[tuple]:
    return result.csv_rows()


SWEEP_HEADER = ("parameter", "value", "seeds", "mean_time", "std_time",
                "pass_rate")
SECURITY_HEADER = ("k", "trials", "empirical", "empirical_se", "closed_form",
                   "exact", "lemma1_bound", "steady_state")


@dataclass(frozen=True)
class SecuritySweepResult:
    rows: tuple   # (k, trials, empirical, se, closed_form, exact, bound, steady)


def make_steps_fn(config: ScenarioConfig):
    """steps_fn(prev_checkpoint_index, cur_checkpoint_index) over the
    checkpoint grid, mirroring the engine's schedule: allowance from the
    deadline policy plus epsilon, converted at the walk step duration."""
    acc = config.acc_params()
    chal = config.challenge_config()
    space = config.checkpoint_space()
    d_ref = config.reference_gap
    from .challenge import _policy_deadline
    cache: Dict = {}

    def steps(prev_idx: Optional[int], cur_idx: int) -> int:
        prev_d = d_ref if prev_idx is None else space.checkpoints[prev_idx]
        cur_d = space.checkpoints[cur_idx]
        allowance = _policy_deadline(prev_d, cur_d, config.v_v, chal, acc,
                                     cache)
        return deadline_to_steps(allowance + chal.epsilon,
                                 config.walk_step_duration)

    return steps


def run_security_sweep(base: ScenarioConfig, k_grid: Sequence[int],
                       trials: int = 2000) -> SecuritySweepResult:
    """Empirical pass rate of the independent follower from full scenario
    episodes, next to the closed-form value, the exact forward-pass value,
    the (1/M)^K bound, and the (1/N)^K approximation.

    The empirical rate counts episodes whose walk sits on the snapped
    checkpoint state at every interior deadline, matching the analytical
    event (the boundary reference-gap entries are excluded there).
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rows = []
    space = base.checkpoint_space()
    model = base.walk_model()
    p = model.transition_matrix()
    checkpoint_states = [model.nearest_state(d) for d in space.checkpoints]
    shared_cache: Dict = {}
    for k in k_grid:
        cfg = replace(base, kind="remote-with-r", k=int(k),
                      record_traces=False)
        passes = 0
        for i in range(trials):
            result = run_scenario(replace(cfg, seed=base.seed + i),
                                  deadline_cache=shared_cache)
            passes += bool(result.security_pass)
        rate = passes / trials
        se = math.sqrt(rate * (1.0 - rate) / trials)

        steps_fn = make_steps_fn(cfg)
        exact = schedule_exact_passing_probability(p, checkpoint_states, k,
                                                   _to_grid_steps(steps_fn,
                                                                  model,
                                                                  space))
        mean_steps = _mean_interior_steps(steps_fn, space)
        closed = passing_probability(p, checkpoint_states, [mean_steps] * k)
        rows.append((k, trials, rate, se, closed, exact,
                     lemma1_bound(space.size, k),
                     steady_state_approx(model.n_states, k)))
    return SecuritySweepResult(tuple(rows))


def _to_grid_steps(steps_fn, model, space):
    """Adapt checkpoint-grid step counts to walk-state indexing."""
    state_to_grid = {model.nearest_state(d): i
                     for i, d in enumerate(space.checkpoints)}

    def fn(prev_state: Optional[int], cur_state: int) -> int:
        prev = None if prev_state is None else state_to_grid[prev_state]
        return steps_fn(prev, state_to_grid[cur_state])

    return fn


def _mean_interior_steps(steps_fn, space) -> int:
    """Typical per-challenge step count for the closed-form column."""
    m = space.size
    total = 0
    count = 0
    for i in range(m):
        total += steps_fn(None, i)
        count += 1
    return max(1, round(total / count))
