"""Shared test helpers: credentials, request rspecs, slice urns."""

from __future__ import annotations

from fedbroker.model import (
    Privilege,
    RSpec,
    RspecLease,
    RspecVariant,
    RecordType,
    hrn_to_urn,
    issue_credential,
    parse_hrn,
)

ALL_PRIVILEGES = frozenset(Privilege)


def operator_credential(root_priv, ttl_seconds: int = 7 * 86400):
    """Root-issued broker credential: every privilege over the whole tree."""
    return issue_credential(
        root_priv,
        subject=parse_hrn("onelab.portal"),
        object=parse_hrn("onelab"),
        object_type=RecordType.authority,
        privileges=ALL_PRIVILEGES,
        ttl_seconds=ttl_seconds,
        issuer=parse_hrn("onelab"),
    )


def make_request_rspec(testbed: str, components, start, end) -> RSpec:
    cids = tuple(f"urn:publicid:IDN+{testbed}+node+n{k:04d}" for k in components)
    return RSpec(RspecVariant.request, leases=(RspecLease(cids, start, end),))


def slice_urn(hrn: str = "onelab.upmc.p1.s1") -> str:
    return hrn_to_urn(parse_hrn(hrn), RecordType.slice).render()
