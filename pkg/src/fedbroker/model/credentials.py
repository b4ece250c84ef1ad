"""Signed capability credentials with delegation chains.

A credential binds a subject hrn to a privilege set over an object hrn,
carries the subject's Ed25519 verification key, and is signed by its
issuer. Delegation nests the parent credential whole: the child link is
signed with the key bound in the parent, so a verifier holding only the
federation root key can walk any chain.

The wire form is a purpose-built canonical binary encoding: every field
length-prefixed (big-endian uint32) in declaration order, with the
detached signature last. Canonical bytes make signatures byte-testable
and keep the format independent of any XML credential schema.
"""

from __future__ import annotations

import base64
import enum
import struct
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .names import Hrn, RecordType, parse_hrn

__all__ = [
    "Privilege",
    "Credential",
    "CredentialError",
    "Expired",
    "BadSignature",
    "PrivilegeEscalation",
    "UntrustedRoot",
    "MalformedCredential",
    "issue_credential",
    "verify_credential",
    "encode_credential",
    "decode_credential",
    "credential_to_base64",
    "credential_from_base64",
    "generate_keypair",
    "public_key_bytes",
    "load_signing_key",
    "save_signing_key",
]


class Privilege(str, enum.Enum):
    register = "register"
    resolve = "resolve"
    list_resources = "list_resources"
    allocate = "allocate"
    delete = "delete"
    refresh = "refresh"


class CredentialError(Exception):
    """Base for verification failures. ``link`` indexes the chain from
    the presented credential (0) toward the root-issued link."""

    def __init__(self, link: int, message: str):
        super().__init__(f"link {link}: {message}")
        self.link = link


class Expired(CredentialError):
    pass


class BadSignature(CredentialError):
    pass


class PrivilegeEscalation(CredentialError):
    pass


class UntrustedRoot(CredentialError):
    def __init__(self, link: int):
        super().__init__(link, "chain root not signed by the trusted root key")


class MalformedCredential(ValueError):
    pass


def _ts(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_ts(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


@dataclass(frozen=True)
class Credential:
    subject: Hrn
    object: Hrn
    object_type: RecordType
    privileges: frozenset[Privilege]
    expires_at: datetime
    issuer: Hrn
    subject_key: bytes
    parent: Credential | None = None
    signature: bytes = b""

    def chain(self) -> list[Credential]:
        """Links ordered from this credential toward the root-issued one."""
        links: list[Credential] = []
        cur: Credential | None = self
        while cur is not None:
            links.append(cur)
            cur = cur.parent
        return links


def _field(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


def signing_bytes(cred: Credential) -> bytes:
    """Canonical serialization of everything the signature covers."""
    parent_bytes = encode_credential(cred.parent) if cred.parent is not None else b""
    return b"".join(
        _field(part)
        for part in (
            cred.subject.render().encode(),
            cred.object.render().encode(),
            cred.object_type.value.encode(),
            ",".join(sorted(p.value for p in cred.privileges)).encode(),
            _ts(cred.expires_at).encode(),
            cred.issuer.render().encode(),
            cred.subject_key,
            parent_bytes,
        )
    )


def encode_credential(cred: Credential) -> bytes:
    return signing_bytes(cred) + _field(cred.signature)


def _take_field(data: bytes, offset: int) -> tuple[bytes, int]:
    if offset + 4 > len(data):
        raise MalformedCredential("truncated field length")
    (length,) = struct.unpack_from(">I", data, offset)
    offset += 4
    if offset + length > len(data):
        raise MalformedCredential("truncated field body")
    return data[offset : offset + length], offset + length


def decode_credential(data: bytes) -> Credential:
    cred, offset = _decode_at(data, 0)
    if offset != len(data):
        raise MalformedCredential(f"{len(data) - offset} trailing bytes")
    return cred


def _decode_at(data: bytes, offset: int) -> tuple[Credential, int]:
    subject_b, offset = _take_field(data, offset)
    object_b, offset = _take_field(data, offset)
    type_b, offset = _take_field(data, offset)
    privs_b, offset = _take_field(data, offset)
    expires_b, offset = _take_field(data, offset)
    issuer_b, offset = _take_field(data, offset)
    subject_key, offset = _take_field(data, offset)
    parent_b, offset = _take_field(data, offset)
    sig_b, offset = _take_field(data, offset)
    try:
        object_type = RecordType(type_b.decode())
        privileges: set[Privilege] = set()
        if privs_b:
            # Fail closed: an unknown privilege name is a parse error,
            # never silently dropped.
            privileges = {Privilege(name) for name in privs_b.decode().split(",")}
        expires_at = _parse_ts(expires_b.decode())
        parent = decode_credential(parent_b) if parent_b else None
        cred = Credential(
            subject=parse_hrn(subject_b.decode()),
            object=parse_hrn(object_b.decode()),
            object_type=object_type,
            privileges=frozenset(privileges),
            expires_at=expires_at,
            issuer=parse_hrn(issuer_b.decode()),
            subject_key=subject_key,
            parent=parent,
            signature=sig_b,
        )
    except MalformedCredential:
        raise
    except ValueError as exc:
        raise MalformedCredential(str(exc)) from None
    return cred, offset


def credential_to_base64(cred: Credential) -> str:
    return base64.b64encode(encode_credential(cred)).decode("ascii")


def credential_from_base64(text: str) -> Credential:
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except Exception as exc:
        raise MalformedCredential(f"bad base64: {exc}") from None
    return decode_credential(raw)


def issue_credential(
    issuer_key: Ed25519PrivateKey,
    subject: Hrn,
    object: Hrn,
    object_type: RecordType,
    privileges: frozenset[Privilege] | set[Privilege],
    ttl_seconds: int,
    parent: Credential | None = None,
    *,
    issuer: Hrn,
    subject_key: bytes = b"",
    now: datetime | None = None,
) -> Credential:
    """Sign a new credential, optionally delegated under ``parent``.

    Delegated privileges must be a subset of the parent's; anything
    wider raises PrivilegeEscalation before signing.
    """
    if ttl_seconds <= 0:
        raise ValueError("ttl_seconds must be positive")
    privileges = frozenset(Privilege(p) for p in privileges)
    if parent is not None and not privileges <= parent.privileges:
        extra = sorted(p.value for p in privileges - parent.privileges)
        raise PrivilegeEscalation(0, f"privileges exceed parent: {extra}")
    now = now or datetime.now(timezone.utc)
    cred = Credential(
        subject=subject,
        object=object,
        object_type=RecordType(object_type),
        privileges=privileges,
        expires_at=_parse_ts(_ts(now + timedelta(seconds=ttl_seconds))),
        issuer=issuer,
        subject_key=subject_key,
        parent=parent,
    )
    return replace(cred, signature=issuer_key.sign(signing_bytes(cred)))


def verify_credential(
    cred: Credential,
    root_key: Ed25519PublicKey | bytes,
    now: datetime | None = None,
) -> frozenset[Privilege]:
    """Verify a full delegation chain and return the effective privileges.

    Every link must be unexpired at ``now`` (the expiry instant itself is
    rejected), carry a valid signature, and hold no privilege its parent
    lacks. The root-issued link must verify against ``root_key``; for all
    other links the signing key is the one bound in the parent. Effective
    privileges are the intersection of every link's set, which for a
    well-formed chain equals the presented credential's set.
    """
    if isinstance(root_key, (bytes, bytearray)):
        root_key = Ed25519PublicKey.from_public_bytes(bytes(root_key))
    now = now or datetime.now(timezone.utc)
    effective: frozenset[Privilege] | None = None
    for i, link in enumerate(cred.chain()):
        if link.expires_at <= now:
            raise Expired(i, f"expired at {_ts(link.expires_at)}")
        if link.parent is None:
            try:
                root_key.verify(link.signature, signing_bytes(link))
            except (InvalidSignature, ValueError):
                raise UntrustedRoot(i) from None
        else:
            if link.issuer != link.parent.subject:
                raise BadSignature(i, "issuer is not the parent credential's subject")
            try:
                parent_key = Ed25519PublicKey.from_public_bytes(link.parent.subject_key)
                parent_key.verify(link.signature, signing_bytes(link))
            except (InvalidSignature, ValueError):
                raise BadSignature(i, "signature does not verify") from None
            if not link.privileges <= link.parent.privileges:
                extra = sorted(p.value for p in link.privileges - link.parent.privileges)
                raise PrivilegeEscalation(i, f"privileges exceed parent: {extra}")
        effective = link.privileges if effective is None else effective & link.privileges
    assert effective is not None
    return effective


# -- key plumbing -----------------------------------------------------------


def generate_keypair() -> tuple[Ed25519PrivateKey, bytes]:
    """New signing key plus its raw 32-byte verification key."""
    key = Ed25519PrivateKey.generate()
    return key, public_key_bytes(key)


def public_key_bytes(key: Ed25519PrivateKey | Ed25519PublicKey) -> bytes:
    from cryptography.hazmat.primitives.serialization import (
        Encoding,
        PublicFormat,
    )

    public = key.public_key() if isinstance(key, Ed25519PrivateKey) else key
    return public.public_bytes(Encoding.Raw, PublicFormat.Raw)


def save_signing_key(key: Ed25519PrivateKey, path) -> None:
    from cryptography.hazmat.primitives.serialization import (
        Encoding,
        NoEncryption,
        PrivateFormat,
    )

    raw = key.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption())
    with open(path, "w", encoding="ascii") as fh:
        fh.write(raw.hex() + "\n")


def load_signing_key(path) -> Ed25519PrivateKey:
    with open(path, encoding="ascii") as fh:
        raw = bytes.fromhex(fh.read().strip())
    return Ed25519PrivateKey.from_private_bytes(raw)
