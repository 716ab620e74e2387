"""Random-walk follower model and passing-probability analysis.

The independent follower is an N-state birth-death chain over a distance
grid: interior states move left, right, or stay with probability 1/3 each;
the two boundary states stay or bounce back with probability 1/2.  The
module provides the closed-form passing probability (product of per-challenge
marginals at cumulative step counts), an exact conditional computation via a
forward pass that survives only checkpoint hits, the (1/M)^K upper bound, the
(1/N)^K steady-state approximation, and Monte Carlo simulation of the walk.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class RandomWalkModel:
    """N-state walk over distances d_min + i * d_step, i = 0..N-1."""

    n_states: int
    d_min: float
    d_max: float

    def __post_init__(self):
        if self.n_states < 2:
            raise ValueError("need at least two walk states")
        if self.d_max <= self.d_min:
            raise ValueError("need d_min < d_max")

    @property
    def d_step(self) -> float:
        return (self.d_max - self.d_min) / (self.n_states - 1)

    def distance(self, state: int) -> float:
        return self.d_min + state * self.d_step

    def distances(self) -> np.ndarray:
        return self.d_min + self.d_step * np.arange(self.n_states)

    def nearest_state(self, distance: float) -> int:
        idx = int(round((distance - self.d_min) / self.d_step))
        return min(max(idx, 0), self.n_states - 1)

    def transition_matrix(self) -> np.ndarray:
        return build_transition_matrix(self.n_states)


def build_transition_matrix(n: int) -> np.ndarray:
    """Row-stochastic walk matrix: 1/3 stay/left/right inside, 1/2 at the
    two boundary states."""
    if n < 2:
        raise ValueError("need at least two states")
    p = np.zeros((n, n))
    p[0, 0] = p[0, 1] = 0.5
    p[n - 1, n - 1] = p[n - 1, n - 2] = 0.5
    for i in range(1, n - 1):
        p[i, i - 1] = p[i, i] = p[i, i + 1] = 1.0 / 3.0
    return p


def n_step_matrix(p: np.ndarray, n: int) -> np.ndarray:
    if n < 0:
        raise ValueError("step count must be non-negative")
    return np.linalg.matrix_power(p, n)


def _validate_checkpoints(n: int, checkpoint_states: Sequence[int]) -> list:
    states = list(checkpoint_states)
    if not states:
        raise ValueError("checkpoint set is empty")
    if len(set(states)) != len(states):
        raise ValueError("checkpoint states must be distinct")
    if any(s < 0 or s >= n for s in states):
        raise ValueError("checkpoint state out of range")
    return states


def passing_probability(p: np.ndarray, checkpoint_states: Sequence[int],
                        step_counts: Sequence[int]) -> float:
    """Closed-form passing probability for K challenges.

    P = (1/(N*M))^K * prod_k sum_{i in S} sum_j P^(n_1+..+n_k)[j, i], i.e.
    the product of per-challenge marginals evaluated at cumulative step
    counts from the uniform initial distribution, without conditioning on
    surviving earlier challenges (see exact_passing_probability for that).
    """
    n = p.shape[0]
    states = _validate_checkpoints(n, checkpoint_states)
    m = len(states)
    counts = list(step_counts)
    if any(c < 1 for c in counts):
        raise ValueError("step counts must be >= 1")
    result = 1.0
    cumulative = np.eye(n)
    for c in counts:
        cumulative = cumulative @ n_step_matrix(p, c)
        result *= cumulative[:, states].sum() / (n * m)
    return result


def exact_passing_probability(p: np.ndarray, checkpoint_states: Sequence[int],
                              step_counts: Sequence[int]) -> float:
    """Exact probability that the walk hits a fresh uniform checkpoint draw
    at every deadline, by a forward pass that keeps only surviving mass."""
    n = p.shape[0]
    states = _validate_checkpoints(n, checkpoint_states)
    m = len(states)
    counts = list(step_counts)
    if any(c < 1 for c in counts):
        raise ValueError("step counts must be >= 1")
    mass = np.full(n, 1.0 / n)
    for c in counts:
        mass = mass @ n_step_matrix(p, c)
        survived = np.zeros(n)
        survived[states] = mass[states] / m
        mass = survived
    return float(mass.sum())


def schedule_exact_passing_probability(
    p: np.ndarray,
    checkpoint_states: Sequence[int],
    k: int,
    steps_fn: Callable[[Optional[int], int], int],
) -> float:
    """Exact passing probability when each challenge's step count depends on
    the previous and current checkpoint draw (deadline-derived schedules).

    steps_fn(prev_state, cur_state) returns the walk steps granted for that
    leg; prev_state is None for the first challenge, which starts from the
    reference gap.  The forward pass tracks, per surviving checkpoint state,
    the joint probability of having hit every earlier draw.
    """
    if k < 1:
        raise ValueError("need at least one challenge")
    n = p.shape[0]
    states = _validate_checkpoints(n, checkpoint_states)
    m = len(states)
    powers: Dict[int, np.ndarray] = {}

    def power(j: int) -> np.ndarray:
        if j not in powers:
            powers[j] = n_step_matrix(p, j)
        return powers[j]

    uniform = np.full(n, 1.0 / n)
    mass = {c: (uniform @ power(steps_fn(None, c)))[c] / m for c in states}
    for _ in range(1, k):
        nxt = {}
        for c in states:
            total = 0.0
            for c_prev, w in mass.items():
                if w:
                    total += w * power(steps_fn(c_prev, c))[c_prev, c]
            nxt[c] = total / m
        mass = nxt
    return float(sum(mass.values()))


def lemma1_bound(m: int, k: int) -> float:
    """Upper bound (1/M)^K on the passing probability."""
    if m < 1:
        raise ValueError("checkpoint count must be >= 1")
    if k < 0:
        raise ValueError("challenge count must be >= 0")
    return (1.0 / m) ** k


def steady_state_approx(n: int, k: int) -> float:
    """Long-horizon approximation (1/N)^K, independent of M."""
    if n < 2:
        raise ValueError("need at least two states")
    if k < 0:
        raise ValueError("challenge count must be >= 0")
    return (1.0 / n) ** k


def deadline_to_steps(deadline: float, step_duration: float) -> int:
    """Walk steps granted by a deadline, at least one."""
    if deadline <= 0 or step_duration <= 0:
        raise ValueError("deadline and step duration must be positive")
    return max(1, round(deadline / step_duration))


def walk_step(state: int, n: int, u: float) -> int:
    """Advance one walk transition given a uniform [0,1) draw."""
    if state == 0:
        return 1 if u < 0.5 else 0
    if state == n - 1:
        return n - 2 if u < 0.5 else n - 1
    if u < 1.0 / 3.0:
        return state - 1
    if u < 2.0 / 3.0:
        return state
    return state + 1


def simulate_random_walk_follower(
    model: RandomWalkModel,
    gamma_generator: Callable,
    tolerance: float,
    trials: int,
    rng,
) -> Tuple[float, float]:
    """Monte Carlo pass rate of the independent follower.

    gamma_generator(rng) yields one episode's challenges as a sequence of
    (checkpoint_distance, n_steps) pairs.  Each episode starts the walk
    uniformly, advances it n_steps per challenge, and passes when the walk
    distance is within tolerance of every checkpoint.  Returns the empirical
    rate and its binomial standard error.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    n = model.n_states
    passes = 0
    for _ in range(trials):
        state = int(rng.integers(0, n))
        ok = True
        for checkpoint, steps in gamma_generator(rng):
            for _ in range(steps):
                state = walk_step(state, n, rng.random())
            if abs(model.distance(state) - checkpoint) > tolerance:
                ok = False
                break
        if ok:
            passes += 1
    rate = passes / trials
    se = (rate * (1.0 - rate) / trials) ** 0.5
    return rate, se
