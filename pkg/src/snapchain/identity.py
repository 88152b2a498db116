"""Membership service: registration, authentication, signatures, channel access.

The registry is the single gate deciding who may touch the network and with
what rights. Identities sign with Ed25519; credentials are stored as salted
PBKDF2 hashes; sessions are bearer tokens with an expiry.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import threading
import time
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import lru_cache
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

PBKDF2_ITERATIONS = 10_000
DEFAULT_SESSION_TTL = 3600.0


class Role(str, Enum):
    PHOTOGRAPHER = "photographer"
    CUSTOMER = "customer"
    ADMIN = "admin"
    PEER = "peer"
    ORDERER = "orderer"


class AccessMode(IntEnum):
    NONE = 0
    READ = 1
    WRITE = 2


@dataclass(frozen=True)
class Identity:
    id: str
    name: str
    role: Role
    public_key: str  # raw Ed25519 public key, hex
    enrolled: bool = True


@dataclass(frozen=True)
class SessionToken:
    token: str
    subject: str
    expires_at: float


class IdentityError(Exception):
    pass


class DuplicateName(IdentityError):
    pass


class UnknownIdentity(IdentityError):
    pass


class BadCredential(IdentityError):
    pass


class UnknownRole(IdentityError):
    pass


class Keypair:
    """Ed25519 signing key with its hex-encoded verification key."""

    def __init__(self, private_key: Ed25519PrivateKey):
        self._private = private_key
        self.public_hex = private_key.public_key().public_bytes_raw().hex()

    @classmethod
    def generate(cls) -> "Keypair":
        return cls(Ed25519PrivateKey.generate())

    @classmethod
    def from_seed(cls, seed: bytes) -> "Keypair":
        """Deterministic keypair from a 32-byte seed (test and sim fixtures)."""
        if len(seed) != 32:
            seed = hashlib.sha256(seed).digest()
        return cls(Ed25519PrivateKey.from_private_bytes(seed))

    def sign(self, message: bytes) -> bytes:
        return self._private.sign(message)

    def private_hex(self) -> str:
        return self._private.private_bytes_raw().hex()


@lru_cache(maxsize=65536)
def _verify_cached(public_hex: str, message: bytes, signature: bytes) -> bool:
    try:
        key = Ed25519PublicKey.from_public_bytes(bytes.fromhex(public_hex))
        key.verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


def verify_raw(public_hex: str, message: bytes, signature: bytes) -> bool:
    """Verify an Ed25519 signature; False on any malformed input.

    Verification is a pure function, so results are memoized: the same
    endorsement gets re-checked on every validating peer.
    """
    if not isinstance(signature, bytes) or not isinstance(message, bytes):
        return False
    return _verify_cached(public_hex, message, signature)


def build_access_matrix(channels: tuple[str, ...]) -> dict[Role, dict[str, AccessMode]]:
    """Least-privilege defaults over the configured channels.

    Customers write their own E1 record and E3 purchases; photographers write
    their E1 record and E2 photos; admins get everything; infrastructure roles
    get no client channels.
    """
    base = {
        Role.CUSTOMER: {"E1": AccessMode.WRITE, "E2": AccessMode.READ, "E3": AccessMode.WRITE},
        Role.PHOTOGRAPHER: {"E1": AccessMode.WRITE, "E2": AccessMode.WRITE, "E3": AccessMode.READ},
        Role.ADMIN: {ch: AccessMode.WRITE for ch in channels},
        Role.PEER: {},
        Role.ORDERER: {},
    }
    matrix: dict[Role, dict[str, AccessMode]] = {}
    for role in Role:
        grants = base.get(role, {})
        matrix[role] = {ch: grants.get(ch, AccessMode.NONE) for ch in channels}
    return matrix


def _hash_secret(secret: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", secret.encode("utf-8"), salt, PBKDF2_ITERATIONS)


class MembershipRegistry:
    """Identity registry plus session issuance.

    All mutating and checking operations take one lock, which makes them
    linearizable; name uniqueness holds under concurrent registration.
    """

    def __init__(self, channels: tuple[str, ...] = ("E1", "E2", "E3", "E4"),
                 session_ttl: float = DEFAULT_SESSION_TTL, rng=None):
        self.channels = channels
        self.session_ttl = session_ttl
        self.access_matrix = build_access_matrix(channels)
        self._lock = threading.RLock()
        # Identity ids come from this generator when one is given, which makes
        # seeded runs reproducible; session tokens always stay unpredictable.
        self._rng = rng
        self._by_name: dict[str, Identity] = {}
        self._by_id: dict[str, Identity] = {}
        self._credentials: dict[str, tuple[bytes, bytes]] = {}  # name -> (salt, hash)
        self._sessions: dict[str, SessionToken] = {}

    def _fresh_id(self) -> str:
        if self._rng is not None:
            return self._rng.randbytes(16).hex()
        return secrets.token_hex(16)

    def register_identity(self, name: str, role: Role | str, public_key: str,
                          secret: str | None = None) -> Identity:
        if not isinstance(role, Role):
            try:
                role = Role(role)
            except ValueError:
                raise UnknownRole(f"unknown role: {role}")
        if not name:
            raise IdentityError("name must be non-empty")
        with self._lock:
            if name in self._by_name:
                raise DuplicateName(f"name already registered: {name}")
            ident = Identity(
                id=self._fresh_id(),
                name=name,
                role=role,
                public_key=public_key,
            )
            self._by_name[name] = ident
            self._by_id[ident.id] = ident
            if secret is not None:
                salt = secrets.token_bytes(16)
                self._credentials[name] = (salt, _hash_secret(secret, salt))
        return ident

    def get(self, name: str) -> Identity:
        with self._lock:
            ident = self._by_name.get(name)
        if ident is None:
            raise UnknownIdentity(f"no such identity: {name}")
        return ident

    def get_by_id(self, identity_id: str) -> Identity:
        with self._lock:
            ident = self._by_id.get(identity_id)
        if ident is None:
            raise UnknownIdentity(f"no such identity id: {identity_id}")
        return ident

    def exists(self, name: str) -> bool:
        with self._lock:
            return name in self._by_name

    def names(self) -> list[str]:
        with self._lock:
            return sorted(self._by_name)

    def authenticate(self, name: str, secret: str) -> SessionToken:
        with self._lock:
            if name not in self._by_name:
                raise UnknownIdentity(f"no such identity: {name}")
            cred = self._credentials.get(name)
            if cred is None:
                raise BadCredential(f"no credential on file for {name}")
            salt, stored = cred
            if not secrets.compare_digest(stored, _hash_secret(secret, salt)):
                raise BadCredential("credential mismatch")
            token = SessionToken(
                token=secrets.token_hex(32),
                subject=name,
                expires_at=time.time() + self.session_ttl,
            )
            self._sessions[token.token] = token
            return token

    def resolve_token(self, token: str) -> Identity:
        """Identity for a live session token; raises BadCredential otherwise."""
        with self._lock:
            session = self._sessions.get(token)
            if session is None or time.time() >= session.expires_at:
                self._sessions.pop(token, None)
                raise BadCredential("invalid or expired token")
            return self._by_name[session.subject]

    def revoke_token(self, token: str) -> None:
        with self._lock:
            self._sessions.pop(token, None)

    def verify_signature(self, identity: Identity, message: bytes, signature: bytes) -> bool:
        if not identity.enrolled:
            return False
        return verify_raw(identity.public_key, message, signature)

    def check_channel_access(self, identity: Identity | str, channel: str,
                             mode: AccessMode | str) -> bool:
        if isinstance(mode, str):
            mode = AccessMode.WRITE if mode == "write" else AccessMode.READ
        if isinstance(identity, str):
            with self._lock:
                ident = self._by_id.get(identity) or self._by_name.get(identity)
            if ident is None:
                return False
            identity = ident
        if not identity.enrolled:
            return False
        granted = self.access_matrix.get(identity.role, {}).get(channel, AccessMode.NONE)
        return granted >= mode

    # Persistence: one JSON record per identity with exactly the public MSP
    # fields; credential material goes to a sibling private file.

    def save(self, registry_path: str | Path, credentials_path: str | Path | None = None) -> None:
        registry_path = Path(registry_path)
        with self._lock:
            records = [
                {
                    "id": i.id,
                    "name": i.name,
                    "role": i.role.value,
                    "public_key": i.public_key,
                    "enrolled": i.enrolled,
                }
                for i in self._by_name.values()
            ]
            creds = {
                name: {"salt": salt.hex(), "hash": digest.hex()}
                for name, (salt, digest) in self._credentials.items()
            }
        registry_path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
        if credentials_path is not None:
            Path(credentials_path).write_text(json.dumps(creds, sort_keys=True))

    def load(self, registry_path: str | Path, credentials_path: str | Path | None = None) -> None:
        registry_path = Path(registry_path)
        with self._lock:
            for line in registry_path.read_text().splitlines():
                if not line.strip():
                    continue
                rec = json.loads(line)
                ident = Identity(
                    id=rec["id"],
                    name=rec["name"],
                    role=Role(rec["role"]),
                    public_key=rec["public_key"],
                    enrolled=rec["enrolled"],
                )
                self._by_name[ident.name] = ident
                self._by_id[ident.id] = ident
            if credentials_path is not None and Path(credentials_path).exists():
                creds = json.loads(Path(credentials_path).read_text())
                for name, entry in creds.items():
                    self._credentials[name] = (
                        bytes.fromhex(entry["salt"]),
                        bytes.fromhex(entry["hash"]),
                    )
