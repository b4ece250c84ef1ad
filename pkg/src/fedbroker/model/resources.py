"""Testbed resources and scheduled reservations.

Lease intervals are half-open ``[start, end)`` so back-to-back
reservations on the same node never conflict. Lease ids are a
deterministic digest of (testbed, components, interval): the wire
grammar carries no id attribute, so broker and aggregate manager derive
identical ids independently.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .names import Urn, UrnType, parse_urn

MIN_LEASE_SECONDS = 60


class LeaseStatus(str, enum.Enum):
    pending = "pending"
    accepted = "accepted"
    rejected = "rejected"
    expired = "expired"
    deleted = "deleted"


@dataclass(frozen=True)
class Resource:
    """One allocatable component advertised by a testbed."""

    component_id: Urn
    testbed: str
    name: str
    resource_type: str
    exclusive: bool
    available: bool = True
    latitude: float | None = None
    longitude: float | None = None
    attributes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.component_id.type is not UrnType.node:
            raise ValueError(f"component_id must be a node urn, got {self.component_id.type}")


class InvalidLease(ValueError):
    pass


@dataclass(frozen=True)
class Lease:
    lease_id: str
    slice: str | None
    testbed: str
    components: tuple[str, ...]
    start_time: datetime
    end_time: datetime
    status: LeaseStatus = LeaseStatus.pending

    def __post_init__(self) -> None:
        if not self.components:
            raise InvalidLease("a lease needs at least one component")
        if self.start_time >= self.end_time:
            raise InvalidLease("start_time must precede end_time")
        if (self.end_time - self.start_time).total_seconds() < MIN_LEASE_SECONDS:
            raise InvalidLease(f"duration under {MIN_LEASE_SECONDS}s")
        for cid in self.components:
            urn = parse_urn(cid)
            if ":".join(urn.authority) != self.testbed:
                raise InvalidLease(f"{cid} does not belong to testbed {self.testbed}")


def lease_digest(testbed: str, components, start_time: datetime, end_time: datetime) -> str:
    """Stable 16-hex-char lease id for a reservation tuple."""
    basis = "|".join(
        [testbed, ",".join(sorted(components)), _iso(start_time), _iso(end_time)]
    )
    return hashlib.sha256(basis.encode()).hexdigest()[:16]


def leases_overlap(a: Lease, b: Lease) -> bool:
    """True iff the leases share a component and their half-open
    intervals intersect with positive measure."""
    if not set(a.components) & set(b.components):
        return False
    return a.start_time < b.end_time and b.start_time < a.end_time


def intervals_conflict(
    a_components, a_start: datetime, a_end: datetime,
    b_components, b_start: datetime, b_end: datetime,
) -> bool:
    """Overlap test on raw tuples, for callers without Lease objects."""
    if not set(a_components) & set(b_components):
        return False
    return a_start < b_end and b_start < a_end


def _iso(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
