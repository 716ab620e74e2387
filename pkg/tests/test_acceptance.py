"""Acceptance suite: one test per top-level criterion, each printing a
PASS/FAIL line with the measured values so a run of `pytest -v
tests/test_acceptance.py -s` doubles as the acceptance report."""

import itertools
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from pofsim.acc import AccParams, compute_deadline
from pofsim.challenge import build_checkpoint_space
from pofsim.scenario import ScenarioConfig, run_scenario
from pofsim.security import (build_transition_matrix, exact_passing_probability,
                             lemma1_bound, n_step_matrix, passing_probability,
                             simulate_random_walk_follower, RandomWalkModel)
from pofsim.sweeps import (run_security_sweep, run_sweep,
                           write_challenges_csv, write_traces_csv)

ACC = AccParams(lam=0.4, tau=0.5, dt=0.1, gamma=0.3)


def report(criterion, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    return ok


def spread_states(n, m):
    if m == 1:
        return [n // 2]
    states = sorted({round(i * (n - 1) / (m - 1)) for i in range(m)})
    assert len(states) == m
    return states


def test_criterion_01_checkpoint_space():
    t0 = time.perf_counter()
    space = build_checkpoint_space(30.0, 1.0, 2.0, 0.3)
    elapsed = time.perf_counter() - t0
    ok = (space.size == 51
          and space.checkpoints[0] == pytest.approx(30.0, abs=1e-12)
          and space.checkpoints[-1] == pytest.approx(60.0, abs=1e-9)
          and all(abs(b - a - 0.6) < 1e-9 for a, b in
                  zip(space.checkpoints, space.checkpoints[1:]))
          and elapsed < 1e-3)
    assert report(1, ok, f"M={space.size}, span "
                  f"[{space.checkpoints[0]:.1f}, {space.checkpoints[-1]:.1f}] m, "
                  f"spacing 0.6 m, built in {elapsed*1e3:.3f} ms")


@pytest.fixture(scope="module")
def reference_deadline():
    t0 = time.perf_counter()
    result = compute_deadline(45.0, 42.0, 30.0, 30.0, ACC)
    elapsed = time.perf_counter() - t0
    return result, elapsed


def test_criterion_02_deadline_reproduction(reference_deadline):
    result, elapsed = reference_deadline
    ok = 6.5 <= result.deadline <= 8.7 and elapsed < 0.010
    assert report(2, ok, f"45->42 m deadline {result.deadline:.2f} s "
                  f"(window [6.5, 8.7], computed in {elapsed*1e3:.2f} ms)")


def test_criterion_03_smooth_maneuver(reference_deadline):
    result, _ = reference_deadline
    peak = max(abs(v - 30.0) for _, v, _ in result.trajectory)
    ok = peak <= 0.7
    assert report(3, ok, f"peak |v - 30| = {peak:.3f} m/s (limit 0.7)")


def test_criterion_04_gain_ordering(reference_deadline):
    fast = reference_deadline[0].deadline
    slow = compute_deadline(45.0, 42.0, 30.0, 30.0,
                            replace(ACC, lam=0.1)).deadline
    ok = slow > fast
    assert report(4, ok, f"deadline(lam=0.1) = {slow:.1f} s > "
                  f"deadline(lam=0.4) = {fast:.1f} s")


def test_criterion_05_tolerance_monotonicity():
    gammas = (0.1, 0.2, 0.3, 0.5, 1.0)
    deadlines = [compute_deadline(45.0, 42.0, 30.0, 30.0,
                                  replace(ACC, gamma=g)).deadline
                 for g in gammas]
    ok = all(b <= a for a, b in zip(deadlines, deadlines[1:]))
    assert report(5, ok, "deadlines over gamma "
                  f"{dict(zip(gammas, [round(d, 1) for d in deadlines]))}")


def test_criterion_06_completeness_and_timing():
    base = ScenarioConfig(kind="honest", k=5, record_traces=False)
    times = []
    challenge_phase = []
    accepts = 0
    for seed in range(100):
        res = run_scenario(replace(base, seed=seed))
        accepts += res.verdict == "ACCEPT"
        times.append(res.verification_time)
        # span through the last checkpoint, before the recovery leg
        challenge_phase.append(res.gamma.entries[-2].absolute_time
                               - res.gamma.t0)
    mean_time = sum(times) / len(times)
    mean_phase = sum(challenge_phase) / len(challenge_phase)

    wall0 = time.perf_counter()
    sweep = run_sweep(ScenarioConfig(kind="honest", record_traces=False),
                      "K", list(range(1, 9)), seeds=30)
    wall = time.perf_counter() - wall0
    ks = np.arange(1, 9)
    means = np.array([row[2] for row in sweep.rows])
    slope = float(np.polyfit(ks, means, 1)[0])

    ok_accept = report("6a", accepts == 100,
                       f"honest acceptance {accepts}/100 (need 100)")
    ok_time = report("6b", mean_time < 60.0,
                     f"mean verification time {mean_time:.1f} s over 100 "
                     f"seeds (need < 60 s simulated per run; the K-challenge "
                     f"phase alone, excluding the recovery leg, averages "
                     f"{mean_phase:.1f} s)")
    ok_slope = report("6c", 7.0 <= slope <= 13.0,
                      f"verification-time slope {slope:.1f} s/challenge over "
                      f"K in 1..8 (window [7, 13])")
    ok_wall = report("6d", wall < 60.0,
                     f"K sweep wall clock {wall:.1f} s (need < 60 s)")
    assert ok_accept and ok_time and ok_slope and ok_wall


def test_criterion_07_traffic_robustness():
    rejected = run_scenario(ScenarioConfig(kind="traffic", seed=0,
                                           record_traces=False))
    needed = rejected.required_times[0]
    accepted = run_scenario(ScenarioConfig(kind="traffic", seed=0,
                                           adjustment="recompute",
                                           record_traces=False))
    ok = (rejected.verdict == "REJECT"
          and 11.5 <= needed <= 15.7
          and accepted.verdict == "ACCEPT"
          and 11.5 <= accepted.gamma.entries[1].deadline <= 15.7)
    assert report(7, ok, f"unadjusted: {rejected.verdict}, completion needs "
                  f"{needed:.1f} s (window [11.5, 15.7]); recompute: "
                  f"{accepted.verdict} with deadline "
                  f"{accepted.gamma.entries[1].deadline:.1f} s")


def test_criterion_08_markov_exactness():
    p = build_transition_matrix(3)
    hand = np.array([[0.5, 0.5, 0.0],
                     [1 / 3, 1 / 3, 1 / 3],
                     [0.0, 0.5, 0.5]])
    matrix_ok = np.array_equal(p, hand)

    value = passing_probability(p, [0, 1], [1])
    # enumeration oracle over (initial state, checkpoint draw) pairs
    pn = n_step_matrix(p, 1)
    oracle = sum((1 / 3) * 0.5 * pn[j, c] for j in range(3) for c in (0, 1))
    ok = (matrix_ok and abs(value - 13.0 / 36.0) < 1e-12
          and abs(value - oracle) < 1e-12)
    assert report(8, ok, f"3-state matrix exact; single-challenge probability "
                  f"{value:.12f} = 13/36 against enumeration")


def test_criterion_09_lemma1_bound_holds():
    rng = np.random.default_rng(2024)
    analytic_ok = True
    mc_ok = True
    worst = ("", 0.0)
    for n, m, k in itertools.product((3, 10, 100), (2, 5, 51),
                                     (1, 2, 3, 4, 5)):
        if m > n:
            continue
        p = build_transition_matrix(n)
        states = spread_states(n, m)
        bound = lemma1_bound(m, k)
        closed = passing_probability(p, states, [8] * k)
        if closed > bound + 1e-12:
            analytic_ok = False
        model = RandomWalkModel(n, 30.0, 30.0 + 0.3 * (n - 1))
        dists = [model.distance(s) for s in states]

        def gen(r, dists=dists, k=k):
            return [(dists[int(r.integers(0, len(dists)))], 8)
                    for _ in range(k)]

        rate, se = simulate_random_walk_follower(model, gen,
                                                 model.d_step / 2, 2000, rng)
        if rate > bound + 3 * max(se, 1e-9):
            mc_ok = False
            worst = (f"N={n} M={m} K={k}", rate - bound)
    ok = analytic_ok and mc_ok
    assert report(9, ok, "closed form <= (1/M)^K + 1e-12 and empirical "
                  "(2000 trials) <= bound + 3 SE over the full grid"
                  + ("" if ok else f"; worst {worst}"))


def test_criterion_10_steady_state_approximation():
    n = 100
    p = build_transition_matrix(n)
    states = spread_states(n, 51)
    value = passing_probability(p, states, [5000])
    ok = abs(value - 1.0 / n) <= 0.1 / n
    assert report(10, ok, f"single-challenge value at 5000 steps "
                  f"{value:.6f} vs 1/N = {1.0 / n:.6f} "
                  f"({100 * abs(value * n - 1):.1f}% off, limit 10%)")


@pytest.fixture(scope="module")
def security_mc():
    base = ScenarioConfig(seed=0, record_traces=False)
    return run_security_sweep(base, [1, 3, 5], trials=2000)


def test_criterion_11_security_end_to_end(security_mc):
    rows = {row[0]: row for row in security_mc.rows}
    k1 = rows[1]
    emp, se, exact = k1[2], k1[3], k1[5]
    se = max(se, math.sqrt(exact * (1 - exact) / k1[1]))
    ok_k1 = abs(emp - exact) <= 3 * se
    ok_zero = rows[3][2] == 0.0 and rows[5][2] == 0.0
    ok = ok_k1 and ok_zero
    assert report(11, ok, f"K=1 empirical {emp:.4f} vs exact {exact:.4f} "
                  f"(3 SE = {3 * se:.4f}); zero passes at K=3 and K=5 over "
                  f"2000 episodes each: {ok_zero}")


def test_criterion_12_mitm_variants():
    known = [run_scenario(ScenarioConfig(kind="mitm-known", k=2, seed=5,
                                         record_traces=False))
             for _ in range(2)]
    unknown = [run_scenario(ScenarioConfig(kind="mitm-unknown", k=2, seed=5,
                                           record_traces=False))
               for _ in range(2)]
    ok = (all(r.candidate_outcome == "ABORT"
              and r.candidate_reason == "unexpected-signer"
              and r.verdict == "REJECT" for r in known)
          and all(r.verdict == "ACCEPT" and r.admitted_id == "M"
                  for r in unknown)
          and known[0].verdict == known[1].verdict
          and unknown[0].verdict == unknown[1].verdict)
    assert report(12, ok, "known verifier: candidate abort(unexpected-signer) "
                  "and adversary REJECT; unknown verifier: adversary ACCEPT; "
                  "both stable across repeated runs")


def test_criterion_13_deterministic_output(tmp_path):
    ok = True
    for kind in ("honest", "remote-with-r"):
        blobs = []
        for i in range(2):
            res = run_scenario(ScenarioConfig(kind=kind, k=2, seed=33))
            tp = tmp_path / f"{kind}-{i}-traces.csv"
            cp = tmp_path / f"{kind}-{i}-challenges.csv"
            write_traces_csv(tp, res)
            write_challenges_csv(cp, res)
            blobs.append(tp.read_bytes() + cp.read_bytes())
        ok = ok and blobs[0] == blobs[1]
    assert report(13, ok, "same-seed reruns produce byte-identical traces "
                  "and challenge CSVs (honest and follower scenarios)")
