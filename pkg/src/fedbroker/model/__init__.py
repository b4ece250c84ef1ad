"""Domain types and pure federation logic."""

from .names import (
    Hrn,
    Urn,
    UrnType,
    RecordType,
    MalformedHrn,
    MalformedUrn,
    InvalidCombination,
    parse_hrn,
    parse_urn,
    hrn_to_urn,
    urn_to_hrn,
)
from .records import Record
from .credentials import (
    Privilege,
    Credential,
    CredentialError,
    Expired,
    BadSignature,
    PrivilegeEscalation,
    UntrustedRoot,
    MalformedCredential,
    issue_credential,
    verify_credential,
    encode_credential,
    decode_credential,
    credential_to_base64,
    credential_from_base64,
    generate_keypair,
    public_key_bytes,
    load_signing_key,
    save_signing_key,
)
from .resources import (
    Resource,
    Lease,
    LeaseStatus,
    InvalidLease,
    MIN_LEASE_SECONDS,
    lease_digest,
    leases_overlap,
    intervals_conflict,
)
from .rspec import (
    RSpec,
    RspecLease,
    RspecVariant,
    RspecParseError,
    encode_rspec,
    decode_rspec,
)

__all__ = [name for name in dir() if not name.startswith("_")]
