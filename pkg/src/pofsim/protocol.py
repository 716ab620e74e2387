"""Three-phase join protocol: digital identity verification, physical
challenge-response, and physical verification.

Messages are symbolic sign/encrypt structures (see crypto) with a
deterministic byte encoding (see wire).  Sessions are single-threaded state
machines driven by message deliveries and clock ticks from the scenario
engine; each session emits exactly one terminal event.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

from . import wire
from .acc import AccParams, compute_deadline
from .challenge import (ChallengeConfig, ChallengeEntry, ChallengeSet,
                        CheckpointSpace, generate_challenges,
                        schedule_checkpoints)
from .crypto import (Certificate, Credentials, DecryptionError, Identity,
                     PublicKey, SecretKey, Signature, decrypt, encrypt, sign,
                     verify, verify_certificate)


class ProtocolError(RuntimeError):
    """Structural protocol violation (length mismatch, bad state)."""


class ChallengeAbort(RuntimeError):
    """Candidate-side abort while opening a challenge message."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


# ---------------------------------------------------------------------------
# Messages


def _join_payload(candidate_id: str, verifier_id: str) -> bytes:
    return b"REQ\x00" + candidate_id.encode() + b"\x00" + verifier_id.encode()


@dataclass(frozen=True)
class JoinRequest:
    """Directed join request naming the target verifier."""

    verifier_id: str
    candidate_id: str
    candidate_key: PublicKey
    certificate: Certificate
    signature: Signature

    def to_bytes(self) -> bytes:
        body = wire._str_field(self.verifier_id) \
            + wire._str_field(self.candidate_id) \
            + wire._str_field(self.candidate_key.owner) \
            + wire.encode_certificate(self.certificate) \
            + wire.encode_signature(self.signature)
        return wire.frame(wire.MSG_JOIN, body)

    @staticmethod
    def from_bytes(data: bytes) -> "JoinRequest":
        msg_type, body = wire.unframe(data)
        if msg_type != wire.MSG_JOIN:
            raise wire.WireError("not a join request frame")
        verifier_id, pos = wire._take_str(body, 0)
        candidate_id, pos = wire._take_str(body, pos)
        key_owner, pos = wire._take_str(body, pos)
        cert, pos = wire.decode_certificate(body, pos)
        sig, pos = wire.decode_signature(body, pos)
        return JoinRequest(verifier_id, candidate_id, PublicKey(key_owner),
                           cert, sig)


@dataclass(frozen=True)
class UndirectedJoinRequest:
    """Opportunistic join request sent without knowing the verifier."""

    candidate_id: str
    candidate_key: PublicKey
    certificate: Certificate

    def to_bytes(self) -> bytes:
        body = wire._str_field(self.candidate_id) \
            + wire._str_field(self.candidate_key.owner) \
            + wire.encode_certificate(self.certificate)
        return wire.frame(wire.MSG_JOIN_UNDIRECTED, body)


def make_join_request(creds: Credentials, verifier_id: str) -> JoinRequest:
    sig = sign(creds.secret, _join_payload(creds.id, verifier_id))
    return JoinRequest(verifier_id, creds.id, creds.identity.public_key,
                       creds.identity.certificate, sig)


def verify_join_request(req: JoinRequest, verifier_id: str,
                        ca_public: PublicKey) -> Optional[str]:
    """None when the request is acceptable, otherwise the reject reason."""
    if not verify_certificate(req.certificate, req.candidate_id,
                              req.candidate_key, ca_public):
        return "bad-cert"
    if not verify(req.candidate_key,
                  _join_payload(req.candidate_id, req.verifier_id),
                  req.signature):
        return "bad-sig"
    if req.verifier_id != verifier_id:
        return "wrong-target"
    return None


def _challenge_payload(gamma: ChallengeSet, verifier_id: str,
                       candidate_id: str, t0: float) -> bytes:
    return wire.encode_challenge_set(gamma) + wire._str_field(verifier_id) \
        + wire._str_field(candidate_id) + wire._f64_field(t0)


@dataclass(frozen=True)
class ChallengeMessage:
    """Challenge schedule, signed by the issuer then encrypted for the
    candidate.  The encrypted body carries the issuer's key and certificate
    so an opportunistic candidate can validate the signature."""

    candidate_id: str         # plaintext routing prefix
    ciphertext: object        # crypto.Ciphertext over the signed body
    update: bool = False      # True for mid-run schedule updates

    def to_bytes(self) -> bytes:
        msg_type = wire.MSG_SCHEDULE_UPDATE if self.update else wire.MSG_CHALLENGE
        body = wire._str_field(self.candidate_id) \
            + wire.encode_ciphertext(self.ciphertext)
        return wire.frame(msg_type, body)

    @staticmethod
    def from_bytes(data: bytes) -> "ChallengeMessage":
        msg_type, body = wire.unframe(data)
        if msg_type not in (wire.MSG_CHALLENGE, wire.MSG_SCHEDULE_UPDATE):
            raise wire.WireError("not a challenge frame")
        candidate_id, pos = wire._take_str(body, 0)
        ct, pos = wire.decode_ciphertext(body, pos)
        return ChallengeMessage(candidate_id, ct,
                                msg_type == wire.MSG_SCHEDULE_UPDATE)


@dataclass(frozen=True)
class OpenedChallenge:
    gamma: ChallengeSet
    t0: float
    verifier_id: str
    verifier_key: PublicKey


def make_challenge_message(gamma: ChallengeSet, verifier_creds: Credentials,
                           candidate: Identity, t0: float,
                           update: bool = False) -> ChallengeMessage:
    payload = _challenge_payload(gamma, verifier_creds.id, candidate.id, t0)
    sig = sign(verifier_creds.secret, payload)
    body = wire.encode_signature(sig) + payload \
        + wire._str_field(verifier_creds.identity.public_key.owner) \
        + wire.encode_certificate(verifier_creds.identity.certificate)
    return ChallengeMessage(candidate.id, encrypt(candidate.public_key, body),
                            update)


def open_challenge_message(
    msg: ChallengeMessage,
    candidate_secret: SecretKey,
    ca_public: PublicKey,
    expected_verifier_key: Optional[PublicKey] = None,
) -> OpenedChallenge:
    """Decrypt and authenticate a challenge message.

    With expected_verifier_key set (known-verifier mode) only that signer is
    accepted.  Without it (opportunistic mode) any certificate-backed
    signature is accepted, which deliberately leaves the candidate open to
    verifier impersonation.
    """
    try:
        body = decrypt(candidate_secret, msg.ciphertext)
    except DecryptionError:
        raise ChallengeAbort("undecryptable")
    try:
        sig, pos = wire.decode_signature(body, 0)
        gamma, pos = wire.decode_challenge_set(body, pos)
        verifier_id, pos = wire._take_str(body, pos)
        candidate_id, pos = wire._take_str(body, pos)
        t0, pos = wire._take_f64(body, pos)
        key_owner, pos = wire._take_str(body, pos)
        signer_cert, pos = wire.decode_certificate(body, pos)
    except wire.WireError:
        raise ChallengeAbort("malformed")
    signer_key = PublicKey(key_owner)
    payload = _challenge_payload(gamma, verifier_id, candidate_id, t0)

    if expected_verifier_key is not None:
        if not verify(expected_verifier_key, payload, sig):
            if verify(signer_key, payload, sig) and \
                    verify_certificate(signer_cert, verifier_id, signer_key,
                                       ca_public):
                raise ChallengeAbort("unexpected-signer")
            raise ChallengeAbort("bad-signature")
        return OpenedChallenge(gamma, t0, verifier_id, expected_verifier_key)

    if not verify_certificate(signer_cert, verifier_id, signer_key, ca_public):
        raise ChallengeAbort("bad-signature")
    if not verify(signer_key, payload, sig):
        raise ChallengeAbort("bad-signature")
    return OpenedChallenge(gamma, t0, verifier_id, signer_key)


# ---------------------------------------------------------------------------
# Recording and verification


@dataclass(frozen=True)
class RecordedSet:
    """Sensor readings taken at each scheduled instant (None = no echo)."""

    measurements: tuple        # Optional[float] per challenge entry
    times: tuple               # actual measurement instants


def record_response(gamma: ChallengeSet,
                    feed: Sequence[Tuple[float, Optional[float]]]) -> RecordedSet:
    """Pick the sensor sample nearest each scheduled instant from a feed of
    (time, reading) pairs."""
    if not feed:
        raise ProtocolError("empty sensor feed")
    times = [t for t, _ in feed]
    measurements = []
    instants = []
    for entry in gamma.entries:
        i = bisect.bisect_left(times, entry.absolute_time)
        if i >= len(times):
            i = len(times) - 1
        elif i > 0 and abs(times[i - 1] - entry.absolute_time) <= \
                abs(times[i] - entry.absolute_time):
            i -= 1
        measurements.append(feed[i][1])
        instants.append(times[i])
    return RecordedSet(tuple(measurements), tuple(instants))


@dataclass(frozen=True)
class VerificationResult:
    accepted: bool
    indicators: tuple          # bool per entry, absent readings fail


def physical_verification(gamma: ChallengeSet, recorded: RecordedSet,
                          tolerance: float) -> VerificationResult:
    """Accept exactly when every measured gap is within tolerance of its
    checkpoint.  The comparison is inclusive; a 1e-9 m slack keeps it
    inclusive for readings produced on a floating-point quantization grid."""
    if len(recorded.measurements) != len(gamma.entries):
        raise ProtocolError("recorded set length does not match challenge set")
    indicators = tuple(
        m is not None and abs(entry.distance - m) <= tolerance + 1e-9
        for entry, m in zip(gamma.entries, recorded.measurements)
    )
    return VerificationResult(all(indicators), indicators)


# ---------------------------------------------------------------------------
# Sessions


class Phase(Enum):
    IDLE = "idle"
    IDENTITY_VERIFIED = "identity-verified"
    CHALLENGED = "challenged"
    MEASURING = "measuring"
    DECIDED = "decided"
    ABORTED = "aborted"


@dataclass
class Envelope:
    sender: str
    recipient: str
    payload: object


@dataclass
class TerminalEvent:
    session: str               # owning party id
    outcome: str               # ACCEPT | REJECT | ABORT | COMPLETED
    reason: Optional[str] = None
    peer: Optional[str] = None


class SessionError(ProtocolError):
    pass


class VerifierSession:
    """Verifier side: admit one candidate per session."""

    def __init__(
        self,
        creds: Credentials,
        ca_public: PublicKey,
        space: CheckpointSpace,
        config: ChallengeConfig,
        acc: AccParams,
        d_ref: float,
        rng,
        velocity_fn: Callable[[], float],
        measure_fn: Callable[[], Optional[float]],
        start_delay: float = 1.0,
        adjustment: str = "none",
        recompute_tol: float = 0.5,
        deadline_cache: Optional[dict] = None,
        fixed_checkpoints: Optional[Sequence[float]] = None,
    ):
        self.creds = creds
        self.ca_public = ca_public
        self.space = space
        self.config = config
        self.acc = acc
        self.d_ref = d_ref
        self.rng = rng
        self.velocity_fn = velocity_fn
        self.measure_fn = measure_fn
        self.start_delay = start_delay
        self.adjustment = adjustment
        self.recompute_tol = recompute_tol
        self.deadline_cache = deadline_cache
        self.fixed_checkpoints = fixed_checkpoints

        self.phase = Phase.IDLE
        self.peer: Optional[Identity] = None
        self.gamma: Optional[ChallengeSet] = None
        self.original_gamma: Optional[ChallengeSet] = None
        self.readings: List[Optional[float]] = []
        self.reading_times: List[float] = []
        self.result: Optional[VerificationResult] = None
        self.terminal: Optional[TerminalEvent] = None
        self.reject_reason: Optional[str] = None
        # recompute bookkeeping
        self._next_entry = 0
        self._window_start = 0.0
        self._window_profile: List[float] = []
        self._window_v = 0.0

    def _emit(self, outcome: str, reason: Optional[str] = None) -> TerminalEvent:
        if self.terminal is not None:
            raise SessionError("session already emitted its terminal event")
        self.terminal = TerminalEvent(self.creds.id, outcome, reason,
                                      self.peer.id if self.peer else None)
        return self.terminal

    def on_message(self, env: Envelope, now: float) -> List[Envelope]:
        if not isinstance(env.payload, JoinRequest):
            return []
        if self.phase is not Phase.IDLE:
            return []
        req = env.payload
        reason = verify_join_request(req, self.creds.id, self.ca_public)
        if reason is not None:
            self.phase = Phase.DECIDED
            self.reject_reason = reason
            self._emit("REJECT", reason)
            return []
        self.peer = Identity(req.candidate_id, req.candidate_key,
                             req.certificate)
        t0 = now + self.start_delay
        if self.fixed_checkpoints is not None:
            self.gamma = schedule_checkpoints(
                self.fixed_checkpoints, self.config, self.d_ref,
                self.velocity_fn(), self.acc, t0=t0,
                deadline_cache=self.deadline_cache)
        else:
            self.gamma = generate_challenges(
                self.space, self.config, self.d_ref, self.velocity_fn(),
                self.acc, self.rng, t0=t0, deadline_cache=self.deadline_cache)
        self.original_gamma = self.gamma
        self.phase = Phase.MEASURING
        self._next_entry = 0
        self._window_start = t0
        self._window_v = self.velocity_fn()
        self._window_profile = []
        msg = make_challenge_message(self.gamma, self.creds, self.peer, t0)
        return [Envelope(self.creds.id, self.peer.id, msg)]

    def _maybe_recompute(self, now: float) -> List[Envelope]:
        """Re-derive the active deadline while own velocity is off nominal.

        The stability reference stays the window-start velocity, so the
        estimate keeps refining every tick for as long as the disturbance
        lasts; once the speed profile stops changing the re-derived deadline
        stops moving and no further updates go out.
        """
        k = self._next_entry
        if k == 0 or k >= len(self.gamma.entries):
            return []
        v_now = self.velocity_fn()
        if abs(v_now - self._window_v) <= self.recompute_tol:
            return []
        prev = self.gamma.entries[k - 1]
        entry = self.gamma.entries[k]
        profile = self._window_profile + [v_now]
        v0 = profile[0]
        allowance = compute_deadline(prev.distance, entry.distance, v0, v0,
                                     self.acc, verifier_profile=profile,
                                     settle_to_end=True).deadline
        new_time = self._window_start + allowance + self.config.epsilon
        if new_time <= now:
            # estimate already elapsed; leave the schedule as it stands
            return []
        shift = new_time - entry.absolute_time
        if abs(shift) < self.acc.dt / 2:
            return []
        entries = list(self.gamma.entries[:k])
        entries.append(ChallengeEntry(entry.distance, allowance, new_time))
        for later in self.gamma.entries[k + 1:]:
            entries.append(ChallengeEntry(later.distance, later.deadline,
                                          later.absolute_time + shift))
        self.gamma = ChallengeSet(tuple(entries))
        msg = make_challenge_message(self.gamma, self.creds, self.peer,
                                     self.gamma.t0, update=True)
        return [Envelope(self.creds.id, self.peer.id, msg)]

    def on_tick(self, now: float) -> List[Envelope]:
        if self.phase is not Phase.MEASURING:
            return []
        out: List[Envelope] = []
        if now >= self._window_start - self.acc.dt / 2:
            self._window_profile.append(self.velocity_fn())
        if self.adjustment == "recompute":
            out.extend(self._maybe_recompute(now))
        while self._next_entry < len(self.gamma.entries):
            entry = self.gamma.entries[self._next_entry]
            if now < entry.absolute_time - self.acc.dt / 2:
                break
            self.readings.append(self.measure_fn())
            self.reading_times.append(now)
            self._next_entry += 1
            self._window_start = entry.absolute_time
            self._window_v = self.velocity_fn()
            self._window_profile = [self._window_v]
        if self._next_entry >= len(self.gamma.entries):
            recorded = RecordedSet(tuple(self.readings),
                                   tuple(self.reading_times))
            self.result = physical_verification(self.gamma, recorded,
                                                self.config.gamma)
            self.phase = Phase.DECIDED
            self._emit("ACCEPT" if self.result.accepted else "REJECT")
        return out

    @property
    def recorded(self) -> Optional[RecordedSet]:
        if self.result is None:
            return None
        return RecordedSet(tuple(self.readings), tuple(self.reading_times))


class CandidateSession:
    """Candidate side: request admission, then fly the schedule."""

    def __init__(
        self,
        creds: Credentials,
        ca_public: PublicKey,
        d_ref: float,
        verifier_id: Optional[str] = None,
        expected_verifier_key: Optional[PublicKey] = None,
        clock_skew: float = 0.0,
    ):
        self.creds = creds
        self.ca_public = ca_public
        self.d_ref = d_ref
        self.verifier_id = verifier_id
        self.expected_verifier_key = expected_verifier_key
        self.clock_skew = clock_skew
        self.phase = Phase.IDLE
        self.gamma: Optional[ChallengeSet] = None
        self.t0: Optional[float] = None
        self.bound_key: Optional[PublicKey] = None
        self.bound_id: Optional[str] = None
        self.terminal: Optional[TerminalEvent] = None
        self.abort_reason: Optional[str] = None

    def _emit(self, outcome: str, reason: Optional[str] = None) -> None:
        if self.terminal is not None:
            raise SessionError("session already emitted its terminal event")
        self.terminal = TerminalEvent(self.creds.id, outcome, reason,
                                      self.bound_id)

    def start(self) -> List[Envelope]:
        if self.phase is not Phase.IDLE:
            return []
        self.phase = Phase.IDENTITY_VERIFIED
        if self.verifier_id is not None:
            req = make_join_request(self.creds, self.verifier_id)
            return [Envelope(self.creds.id, self.verifier_id, req)]
        req = UndirectedJoinRequest(self.creds.id,
                                    self.creds.identity.public_key,
                                    self.creds.identity.certificate)
        return [Envelope(self.creds.id, "*", req)]

    def on_message(self, env: Envelope, now: float) -> List[Envelope]:
        if not isinstance(env.payload, ChallengeMessage):
            return []
        if self.phase in (Phase.DECIDED, Phase.ABORTED):
            return []
        expected = self.expected_verifier_key
        if env.payload.update:
            if self.bound_key is None:
                return []
            expected = self.bound_key  # updates must come from the bound verifier
        try:
            opened = open_challenge_message(env.payload, self.creds.secret,
                                            self.ca_public, expected)
        except ChallengeAbort as abort:
            if not env.payload.update:
                self.phase = Phase.ABORTED
                self.abort_reason = abort.reason
                self._emit("ABORT", abort.reason)
            return []
        if env.payload.update:
            self.gamma = opened.gamma
            return []
        self.gamma = opened.gamma
        self.t0 = opened.t0
        self.bound_key = opened.verifier_key
        self.bound_id = opened.verifier_id
        self.phase = Phase.CHALLENGED
        return []

    def target_distance(self, now: float) -> float:
        """Checkpoint the controller should hold at local time `now`."""
        if self.gamma is None:
            return self.d_ref
        local = now + self.clock_skew
        if self.phase in (Phase.ABORTED,):
            return self.d_ref
        for prev, entry in zip(self.gamma.entries, self.gamma.entries[1:]):
            if local < entry.absolute_time:
                if local < prev.absolute_time and prev is self.gamma.entries[0]:
                    return self.d_ref
                return entry.distance
        return self.d_ref

    def on_tick(self, now: float) -> None:
        if self.phase is Phase.CHALLENGED and self.gamma is not None \
                and now + self.clock_skew >= self.t0:
            self.phase = Phase.MEASURING
        if self.phase is Phase.MEASURING and \
                now + self.clock_skew >= self.gamma.end_time:
            self.phase = Phase.DECIDED
            self._emit("COMPLETED")

    def abort_maneuver(self, reason: str) -> None:
        if self.phase not in (Phase.DECIDED, Phase.ABORTED):
            self.phase = Phase.ABORTED
            self.abort_reason = reason
            self._emit("ABORT", reason)


class MitmAdversary:
    """Scripted man-in-the-middle: jam the candidate's join, substitute its
    own, then relay the received challenge re-signed under its own key."""

    def __init__(self, creds: Credentials, ca_public: PublicKey,
                 verifier_id: str, candidate: Identity):
        self.creds = creds
        self.ca_public = ca_public
        self.verifier_id = verifier_id
        self.candidate = candidate
        self.jammed_join = False
        self.relayed = False

    def filter(self, env: Envelope) -> Tuple[Optional[Envelope], List[Envelope]]:
        """Channel hook: returns (delivered message or None, injections)."""
        if not self.jammed_join and isinstance(
                env.payload, (JoinRequest, UndirectedJoinRequest)) \
                and env.sender == self.candidate.id:
            self.jammed_join = True
            own = make_join_request(self.creds, self.verifier_id)
            return None, [Envelope(self.creds.id, self.verifier_id, own)]
        if not self.relayed and isinstance(env.payload, ChallengeMessage) \
                and env.recipient == self.creds.id and not env.payload.update:
            self.relayed = True
            opened = open_challenge_message(env.payload, self.creds.secret,
                                            self.ca_public)
            relay = make_challenge_message(opened.gamma, self.creds,
                                           self.candidate, opened.t0)
            return env, [Envelope(self.creds.id, self.candidate.id, relay)]
        return env, []
