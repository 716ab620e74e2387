import pytest

from pofsim.acc import (AccParams, ControllerState, NonConvergenceError,
                        StalledCandidateError, compute_deadline,
                        controller_step, desired_acceleration, simple_deadline,
                        smoothed_acceleration)

PARAMS = AccParams(lam=0.4, tau=0.5, dt=0.1, gamma=0.3)


def test_desired_acceleration_closing_gap():
    # too far from the checkpoint and matched speeds: accelerate
    assert desired_acceleration(1.4, 0.0, -3.0, 0.4) == pytest.approx(6.0 / 7.0)


def test_desired_acceleration_at_target():
    assert desired_acceleration(1.5, 0.0, 0.0, 0.4) == 0.0


def test_desired_acceleration_faster_candidate_brakes():
    assert desired_acceleration(1.5, 1.0, 0.0, 0.4) == pytest.approx(-2.0 / 3.0)


def test_desired_acceleration_rejects_bad_gap_time():
    with pytest.raises(ValueError):
        desired_acceleration(0.0, 0.0, -3.0, 0.4)


def test_smoothing_fixed_point():
    assert smoothed_acceleration(0.8, 0.8, 0.1, 0.5) == pytest.approx(0.8)


def test_smoothing_hand_values():
    assert smoothed_acceleration(1.2, 0.0, 0.1, 0.5) == pytest.approx(0.2)
    assert smoothed_acceleration(0.0, 0.6, 0.1, 0.5) == pytest.approx(0.5)


def test_controller_single_step_hand_evaluated():
    state = ControllerState(prev_accel=0.0, delta=-3.0,
                            candidate_velocity=30.0, verifier_velocity=30.0)
    nxt = controller_step(state, 42.0, PARAMS)
    assert nxt.applied_accel == pytest.approx(1.0 / 7.0, abs=1e-12)
    assert nxt.delta == pytest.approx(-3.0 + (3.0 + 0.5 * (1.0 / 7.0) * 0.01) - 3.0,
                                      abs=1e-12)
    assert nxt.delta == pytest.approx(-2.9992857142857142, abs=1e-12)
    assert nxt.candidate_velocity == pytest.approx(30.0 + (1.0 / 7.0) * 0.1,
                                                   abs=1e-12)


def test_controller_equilibrium_is_fixed_point():
    state = ControllerState(prev_accel=0.0, delta=0.0,
                            candidate_velocity=30.0, verifier_velocity=30.0)
    nxt = controller_step(state, 42.0, PARAMS)
    assert nxt.delta == pytest.approx(0.0, abs=1e-12)
    assert nxt.candidate_velocity == pytest.approx(30.0, abs=1e-12)
    assert nxt.applied_accel == pytest.approx(0.0, abs=1e-12)


def test_controller_stalled_candidate():
    state = ControllerState(prev_accel=0.0, delta=-3.0,
                            candidate_velocity=0.0, verifier_velocity=30.0)
    with pytest.raises(StalledCandidateError):
        controller_step(state, 42.0, PARAMS)


def test_error_magnitude_decreases_after_transient():
    state = ControllerState(prev_accel=0.0, delta=-3.0,
                            candidate_velocity=30.0, verifier_velocity=30.0)
    deltas = []
    for _ in range(120):
        state = controller_step(state, 42.0, PARAMS)
        deltas.append(abs(state.delta))
    tail = deltas[20:]  # past the initial transient
    assert all(b < a for a, b in zip(tail, tail[1:]))


def test_deadline_zero_when_already_at_checkpoint():
    result = compute_deadline(45.0, 45.0, 30.0, 30.0, PARAMS)
    assert result.deadline == 0.0
    assert result.converged


def test_deadline_invariants():
    result = compute_deadline(45.0, 42.0, 30.0, 30.0, PARAMS)
    assert result.converged
    assert abs(result.trajectory[-1][0]) < PARAMS.gamma
    steps = len(result.trajectory) - 1
    assert result.deadline == pytest.approx(steps * PARAMS.dt)


def test_deadline_non_convergence_error():
    tight = AccParams(lam=0.4, tau=0.5, dt=0.1, gamma=0.3, max_iters=5)
    with pytest.raises(NonConvergenceError):
        compute_deadline(60.0, 30.0, 30.0, 30.0, tight)


def test_deadline_with_profile_held_constant_matches_scalar():
    plain = compute_deadline(45.0, 42.0, 30.0, 30.0, PARAMS)
    profiled = compute_deadline(45.0, 42.0, 30.0, 30.0, PARAMS,
                                verifier_profile=[30.0])
    assert profiled.deadline == pytest.approx(plain.deadline)


def test_deadline_braking_profile_extends_arrival():
    # verifier drops 30 -> 27 two seconds in: settled arrival comes far later
    profile = [30.0] * 20 + [max(27.0, 30.0 - 0.6 * 0.1 * i) for i in range(200)]
    disturbed = compute_deadline(45.0, 42.0, 30.0, 30.0, PARAMS,
                                 verifier_profile=profile, settle_to_end=True)
    plain = compute_deadline(45.0, 42.0, 30.0, 30.0, PARAMS)
    assert disturbed.deadline > plain.deadline + 2.0


def test_simple_deadline_values():
    assert simple_deadline(42.0, 45.0, 1.0, 0.5) == pytest.approx(3.5)
    assert simple_deadline(45.0, 45.0, 1.0, 0.0) == 0.0
    assert simple_deadline(60.0, 45.0, 3.0, 1.0) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        simple_deadline(42.0, 45.0, 0.0, 0.5)


def test_acc_params_validation():
    with pytest.raises(ValueError):
        AccParams(lam=0.0)
    with pytest.raises(ValueError):
        AccParams(tau=-1.0)
    with pytest.raises(ValueError):
        AccParams(gamma=0.0)
