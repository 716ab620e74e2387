"""Proof-of-following platoon admission: protocol, maneuver model, security
analysis, and scenario harness."""

from .acc import (AccParams, ControllerState, DeadlineResult,
                  NonConvergenceError, StalledCandidateError, compute_deadline,
                  controller_step, desired_acceleration, simple_deadline,
                  smoothed_acceleration)
from .challenge import (AdjustmentTimeoutError, ChallengeConfig,
                        ChallengeEntry, ChallengeSet, CheckpointSpace,
                        adjust_deadlines, build_checkpoint_space,
                        generate_challenges, schedule_checkpoints)
from .crypto import (CertificateAuthority, Credentials, Identity,
                     generate_keypair)
from .kinematics import (RangeSensor, RouteTrace, VehicleState,
                         integrate_step, measure_range)
from .protocol import (ChallengeAbort, ChallengeMessage, JoinRequest,
                       RecordedSet, VerificationResult, make_challenge_message,
                       make_join_request, open_challenge_message,
                       physical_verification, record_response,
                       verify_join_request)
from .scenario import ScenarioConfig, ScenarioResult, run_scenario
from .security import (RandomWalkModel, build_transition_matrix,
                       deadline_to_steps, exact_passing_probability,
                       lemma1_bound, n_step_matrix, passing_probability,
                       schedule_exact_passing_probability,
                       simulate_random_walk_follower, steady_state_approx)
from .sweeps import (SecuritySweepResult, SweepResult, run_security_sweep,
                     run_sweep)

__version__ = "0.1.0"
