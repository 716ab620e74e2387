"""Deterministic wire format for protocol messages.

Every message is framed as

    [1-byte message type][4-byte big-endian body length][body]

and a body is a sequence of tagged fields

    [1-byte field tag][4-byte big-endian length][value bytes]

in a fixed order per message type.  Strings are UTF-8, floats are 8-byte
big-endian IEEE doubles, and nested structures (signatures, certificates,
ciphertexts, challenge sets) are themselves field sequences.  The encoding
is a pure function of the message contents, so logged traces replay
bit-exactly.
"""

from __future__ import annotations

import struct
from typing import Tuple

from .challenge import ChallengeEntry, ChallengeSet
from .crypto import Certificate, Ciphertext, Signature

# Message types
MSG_JOIN = 0x01
MSG_JOIN_UNDIRECTED = 0x02
MSG_CHALLENGE = 0x03
MSG_SCHEDULE_UPDATE = 0x04

# Field tags
TAG_STR = 0x10
TAG_F64 = 0x11
TAG_SIG = 0x12
TAG_CERT = 0x13
TAG_CIPHER = 0x14
TAG_GAMMA = 0x15
TAG_BYTES = 0x16


class WireError(ValueError):
    """Malformed or truncated wire data."""


def _field(tag: int, value: bytes) -> bytes:
    return bytes([tag]) + struct.pack(">I", len(value)) + value


def _take_field(data: bytes, offset: int, expect: int) -> Tuple[bytes, int]:
    if offset + 5 > len(data):
        raise WireError("truncated field header")
    tag = data[offset]
    if tag != expect:
        raise WireError(f"expected tag 0x{expect:02x}, found 0x{tag:02x}")
    length = struct.unpack_from(">I", data, offset + 1)[0]
    end = offset + 5 + length
    if end > len(data):
        raise WireError("truncated field value")
    return data[offset + 5:end], end


def _str_field(value: str) -> bytes:
    return _field(TAG_STR, value.encode())


def _f64_field(value: float) -> bytes:
    return _field(TAG_F64, struct.pack(">d", value))


def _take_str(data: bytes, offset: int) -> Tuple[str, int]:
    raw, offset = _take_field(data, offset, TAG_STR)
    return raw.decode(), offset


def _take_f64(data: bytes, offset: int) -> Tuple[float, int]:
    raw, offset = _take_field(data, offset, TAG_F64)
    return struct.unpack(">d", raw)[0], offset


def encode_signature(sig: Signature) -> bytes:
    return _field(TAG_SIG, _str_field(sig.signer) + _field(TAG_BYTES, sig.payload))


def decode_signature(data: bytes, offset: int = 0) -> Tuple[Signature, int]:
    raw, offset = _take_field(data, offset, TAG_SIG)
    signer, pos = _take_str(raw, 0)
    payload, pos = _take_field(raw, pos, TAG_BYTES)
    return Signature(signer, payload), offset


def encode_certificate(cert: Certificate) -> bytes:
    body = _str_field(cert.subject_id) + _str_field(cert.subject_key) \
        + encode_signature(cert.signature)
    return _field(TAG_CERT, body)


def decode_certificate(data: bytes, offset: int = 0) -> Tuple[Certificate, int]:
    raw, offset = _take_field(data, offset, TAG_CERT)
    subject_id, pos = _take_str(raw, 0)
    subject_key, pos = _take_str(raw, pos)
    sig, pos = decode_signature(raw, pos)
    return Certificate(subject_id, subject_key, sig), offset


def encode_ciphertext(ct: Ciphertext) -> bytes:
    return _field(TAG_CIPHER, _str_field(ct.recipient) + _field(TAG_BYTES, ct.body))


def decode_ciphertext(data: bytes, offset: int = 0) -> Tuple[Ciphertext, int]:
    raw, offset = _take_field(data, offset, TAG_CIPHER)
    recipient, pos = _take_str(raw, 0)
    body, pos = _take_field(raw, pos, TAG_BYTES)
    return Ciphertext(recipient, body), offset


def encode_challenge_set(gamma: ChallengeSet) -> bytes:
    body = struct.pack(">I", len(gamma.entries))
    for entry in gamma.entries:
        body += struct.pack(">ddd", entry.distance, entry.deadline,
                            entry.absolute_time)
    return _field(TAG_GAMMA, body)


def decode_challenge_set(data: bytes, offset: int = 0) -> Tuple[ChallengeSet, int]:
    raw, offset = _take_field(data, offset, TAG_GAMMA)
    if len(raw) < 4:
        raise WireError("truncated challenge set")
    count = struct.unpack_from(">I", raw, 0)[0]
    if len(raw) != 4 + count * 24:
        raise WireError("challenge set length mismatch")
    entries = []
    for i in range(count):
        d, ddl, t = struct.unpack_from(">ddd", raw, 4 + i * 24)
        entries.append(ChallengeEntry(d, ddl, t))
    return ChallengeSet(tuple(entries)), offset


def frame(msg_type: int, body: bytes) -> bytes:
    return bytes([msg_type]) + struct.pack(">I", len(body)) + body


def unframe(data: bytes) -> Tuple[int, bytes]:
    if len(data) < 5:
        raise WireError("truncated frame")
    msg_type = data[0]
    length = struct.unpack_from(">I", data, 1)[0]
    if len(data) != 5 + length:
        raise WireError("frame length mismatch")
    return msg_type, data[5:]
