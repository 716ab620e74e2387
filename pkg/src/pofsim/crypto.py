"""Symbolic public-key primitives for the protocol model.

Signatures and ciphertexts are tagged values checked by key identity: a
signature verifies exactly when it was produced by the secret key matching
the public key over the identical payload, and a ciphertext opens exactly for
the matching recipient key.  The interfaces mirror a real provider so one
could be swapped in, but no actual cryptography happens here.
"""

from __future__ import annotations

from dataclasses import dataclass


class DecryptionError(RuntimeError):
    """Ciphertext addressed to a different key."""


@dataclass(frozen=True)
class PublicKey:
    owner: str


@dataclass(frozen=True)
class SecretKey:
    owner: str


@dataclass(frozen=True)
class KeyPair:
    public: PublicKey
    secret: SecretKey


def generate_keypair(owner: str) -> KeyPair:
    return KeyPair(PublicKey(owner), SecretKey(owner))


@dataclass(frozen=True)
class Signature:
    signer: str       # owner tag of the signing secret key
    payload: bytes    # exact bytes that were signed


def sign(secret: SecretKey, payload: bytes) -> Signature:
    return Signature(secret.owner, bytes(payload))


def verify(public: PublicKey, payload: bytes, signature: Signature) -> bool:
    return signature.signer == public.owner and signature.payload == bytes(payload)


@dataclass(frozen=True)
class Ciphertext:
    recipient: str    # owner tag of the only key that can open this
    body: bytes


def encrypt(public: PublicKey, plaintext: bytes) -> Ciphertext:
    return Ciphertext(public.owner, bytes(plaintext))


def decrypt(secret: SecretKey, ciphertext: Ciphertext) -> bytes:
    if secret.owner != ciphertext.recipient:
        raise DecryptionError("ciphertext addressed to a different key")
    return ciphertext.body


@dataclass(frozen=True)
class Certificate:
    """CA-signed binding of an identity string to a public key."""

    subject_id: str
    subject_key: str
    signature: Signature


def _cert_payload(subject_id: str, subject_key: str) -> bytes:
    return b"CERT\x00" + subject_id.encode() + b"\x00" + subject_key.encode()


def issue_certificate(ca_secret: SecretKey, subject_id: str,
                      subject_public: PublicKey) -> Certificate:
    payload = _cert_payload(subject_id, subject_public.owner)
    return Certificate(subject_id, subject_public.owner, sign(ca_secret, payload))


def verify_certificate(cert: Certificate, subject_id: str,
                       subject_public: PublicKey, ca_public: PublicKey) -> bool:
    if cert.subject_id != subject_id or cert.subject_key != subject_public.owner:
        return False
    return verify(ca_public, _cert_payload(cert.subject_id, cert.subject_key),
                  cert.signature)


@dataclass(frozen=True)
class Identity:
    """Public half of a vehicle's credentials."""

    id: str
    public_key: PublicKey
    certificate: Certificate


@dataclass(frozen=True)
class Credentials:
    """Identity plus the matching secret key."""

    identity: Identity
    secret: SecretKey

    @property
    def id(self) -> str:
        return self.identity.id


class CertificateAuthority:
    """Issues vehicle credentials under one root key.

    Key material is namespaced by the issuing root, so two roots enrolling
    the same vehicle id still hold distinct (symbolic) keys.
    """

    def __init__(self, name: str = "CA"):
        self._keys = generate_keypair(name)

    @property
    def public_key(self) -> PublicKey:
        return self._keys.public

    def enroll(self, vehicle_id: str) -> Credentials:
        keys = generate_keypair(f"{self._keys.public.owner}/{vehicle_id}")
        cert = issue_certificate(self._keys.secret, vehicle_id, keys.public)
        return Credentials(Identity(vehicle_id, keys.public, cert), keys.secret)
