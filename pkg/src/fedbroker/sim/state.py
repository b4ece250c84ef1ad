"""In-memory federation state behind the simulated registry and AMs.

Inventories are derived deterministically from (fixture seed, testbed
name): same fixture, same seed, byte-identical advertisements. Lease
table mutations are serialized per testbed so accept/reject decisions
are race-free, and every decision is recorded in order for replay
against the occupancy-grid oracle.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass
from datetime import datetime, timezone

from ..model import (
    Credential,
    CredentialError,
    Hrn,
    MalformedCredential,
    Privilege,
    RSpec,
    RspecLease,
    RspecVariant,
    Record,
    RecordType,
    Resource,
    credential_from_base64,
    lease_digest,
    intervals_conflict,
    parse_hrn,
    parse_urn,
    urn_to_hrn,
    verify_credential,
)
from ..sfa.faults import (
    FAULT_BAD_CREDENTIAL,
    FAULT_DUPLICATE,
    FAULT_LEASE_CONFLICT,
    FAULT_NOT_FOUND,
)
from .config import FederationFixture, SimTestbedConfig
from .oracle import OccupancyGrid

ROOT_HRN = "onelab"
MONITOR_AUTHORITY = "onelab.monitor"


class SimFault(Exception):
    """Wire-level fault; the server layer converts it to an XML-RPC fault."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def testbed_authority_hrn(testbed: str) -> str:
    return f"{ROOT_HRN}.{testbed.replace('-', '_')}"


def _now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class _CredentialGate:
    def __init__(self, root_public_key: bytes):
        self._root_public_key = root_public_key

    def authorize(self, credential_b64: str, privilege: Privilege,
                  scope: Hrn | None = None) -> Credential:
        try:
            cred = credential_from_base64(credential_b64)
            privileges = verify_credential(cred, self._root_public_key)
        except (MalformedCredential, CredentialError) as exc:
            raise SimFault(FAULT_BAD_CREDENTIAL, str(exc)) from None
        if privilege not in privileges:
            raise SimFault(FAULT_BAD_CREDENTIAL, f"credential lacks {privilege.value}")
        if scope is not None and not cred.object.is_ancestor_of(scope):
            raise SimFault(
                FAULT_BAD_CREDENTIAL,
                f"credential scope {cred.object.render()} does not cover {scope.render()}",
            )
        return cred


class RegistrySim:
    """Root-of-trust directory: authority/user/project/slice records."""

    def __init__(self, root_public_key: bytes):
        self._gate = _CredentialGate(root_public_key)
        self._lock = threading.Lock()
        self._records: dict[str, Record] = {}

    def seed_record(self, record: Record) -> None:
        self._records[record.hrn.render()] = record

    def register(self, record: Record, credential_b64: str) -> Record:
        parent = record.hrn.parent() if len(record.hrn.segments) > 1 else record.hrn
        self._gate.authorize(credential_b64, Privilege.register, scope=parent)
        with self._lock:
            key = record.hrn.render()
            if key in self._records:
                raise SimFault(FAULT_DUPLICATE, f"{key} already registered")
            if len(record.hrn.segments) > 1 and parent.render() not in self._records:
                raise SimFault(FAULT_NOT_FOUND, f"parent {parent.render()} not registered")
            now = _now_iso()
            stored = Record(
                hrn=record.hrn,
                type=record.type,
                email=record.email,
                members=record.members,
                public_key=record.public_key,
                created_at=now,
                updated_at=now,
            )
            self._records[key] = stored
            return stored

    def resolve(self, hrn: str, credential_b64: str) -> Record:
        self._gate.authorize(credential_b64, Privilege.resolve)
        with self._lock:
            record = self._records.get(hrn)
        if record is None:
            raise SimFault(FAULT_NOT_FOUND, f"no record for {hrn}")
        return record

    def list_children(self, hrn: str, credential_b64: str) -> list[Record]:
        self._gate.authorize(credential_b64, Privilege.resolve)
        parent = parse_hrn(hrn)
        with self._lock:
            return sorted(
                (
                    r for r in self._records.values()
                    if len(r.hrn.segments) == len(parent.segments) + 1
                    and parent.is_ancestor_of(r.hrn)
                ),
                key=lambda r: r.hrn.render(),
            )

    def remove(self, hrn: str, record_type: str, credential_b64: str) -> bool:
        target = parse_hrn(hrn)
        scope = target.parent() if len(target.segments) > 1 else target
        self._gate.authorize(credential_b64, Privilege.register, scope=scope)
        with self._lock:
            record = self._records.get(hrn)
            if record is None or record.type.value != record_type:
                raise SimFault(FAULT_NOT_FOUND, f"no {record_type} record for {hrn}")
            del self._records[hrn]
            return True

    def dump(self) -> list[Record]:
        with self._lock:
            return sorted(self._records.values(), key=lambda r: r.hrn.render())


@dataclass(frozen=True)
class SimLease:
    lease_id: str
    slice_urn: str | None
    components: tuple[str, ...]
    start_time: datetime
    end_time: datetime


@dataclass(frozen=True)
class AllocationDecision:
    accepted: bool
    components: tuple[str, ...]
    start_time: datetime
    end_time: datetime
    lease_id: str | None = None


class AmSim:
    """One aggregate manager: inventory plus a serialized lease table."""

    def __init__(self, config: SimTestbedConfig, seed: int, root_public_key: bytes):
        self.config = config
        self.name = config.name
        self._gate = _CredentialGate(root_public_key)
        self._lock = threading.Lock()
        self._leases: dict[str, SimLease] = {}
        self.decisions: list[AllocationDecision] = []
        self.resources: dict[str, Resource] = {}
        rng = random.Random(f"{seed}:{config.name}")
        for k in range(1, config.node_count + 1):
            urn = parse_urn(f"urn:publicid:IDN+{config.name}+node+n{k:04d}")
            latitude = longitude = None
            if config.geo:
                lat0, lon0, lat1, lon1 = config.geo
                latitude = round(rng.uniform(lat0, lat1), 6)
                longitude = round(rng.uniform(lon0, lon1), 6)
            self.resources[urn.render()] = Resource(
                component_id=urn,
                testbed=config.name,
                name=f"n{k:04d}",
                resource_type=config.resource_type,
                exclusive=config.exclusive,
                available=True,
                latitude=latitude,
                longitude=longitude,
            )

    def get_version(self) -> dict:
        return {
            "api_version": 3,
            "testbed": self.name,
            "rspec_versions": ["fedbroker-1"],
        }

    def advertisement(self) -> RSpec:
        with self._lock:
            leases = sorted(self._leases.values(), key=lambda l: (l.start_time, l.lease_id))
            return RSpec(
                variant=RspecVariant.advertisement,
                nodes=tuple(self.resources[cid] for cid in sorted(self.resources)),
                leases=tuple(
                    RspecLease(l.components, l.start_time, l.end_time) for l in leases
                ),
            )

    def list_resources(self, credential_b64: str) -> RSpec:
        self._gate.authorize(credential_b64, Privilege.list_resources)
        return self.advertisement()

    def allocate(self, slice_urn: str, credential_b64: str, request: RSpec) -> RSpec:
        slice_hrn = urn_to_hrn(parse_urn(slice_urn))
        self._gate.authorize(credential_b64, Privilege.allocate, scope=slice_hrn)
        if not request.leases:
            raise SimFault(FAULT_NOT_FOUND, "request carries no lease")
        with self._lock:
            for lease in request.leases:
                self._check_components(lease.components)
            conflict = self._first_conflict(request.leases)
            if conflict is not None:
                for lease in request.leases:
                    self.decisions.append(
                        AllocationDecision(False, tuple(lease.components),
                                           lease.start_time, lease.end_time)
                    )
                raise SimFault(
                    FAULT_LEASE_CONFLICT,
                    f"components busy in [{conflict.start_time}, {conflict.end_time})",
                )
            accepted = []
            for lease in request.leases:
                lease_id = lease_digest(self.name, lease.components,
                                        lease.start_time, lease.end_time)
                stored = SimLease(lease_id, slice_urn, tuple(lease.components),
                                  lease.start_time, lease.end_time)
                self._leases[lease_id] = stored
                self.decisions.append(
                    AllocationDecision(True, stored.components, stored.start_time,
                                       stored.end_time, lease_id=lease_id)
                )
                accepted.append(lease)
            return RSpec(variant=RspecVariant.manifest, leases=tuple(accepted))

    def inject_lease(self, components, start_time: datetime, end_time: datetime,
                     slice_urn: str | None = None) -> str:
        """Create a lease behind the broker's back, as an out-of-band
        reservation at the testbed would; used to exercise cache sync."""
        with self._lock:
            self._check_components(components)
            request = [RspecLease(tuple(components), start_time, end_time)]
            conflict = self._first_conflict(request)
            if conflict is not None:
                raise SimFault(FAULT_LEASE_CONFLICT, "injected lease conflicts")
            lease_id = lease_digest(self.name, components, start_time, end_time)
            self._leases[lease_id] = SimLease(
                lease_id, slice_urn, tuple(components), start_time, end_time
            )
            self.decisions.append(
                AllocationDecision(True, tuple(components), start_time, end_time,
                                   lease_id=lease_id)
            )
            return lease_id

    def _check_components(self, components) -> None:
        for cid in components:
            resource = self.resources.get(cid)
            if resource is None:
                raise SimFault(FAULT_NOT_FOUND, f"unknown component {cid}")
            if not resource.exclusive:
                raise SimFault(FAULT_NOT_FOUND, f"{cid} is not exclusive, not leasable")

    def _first_conflict(self, requested) -> SimLease | None:
        for lease in requested:
            for existing in self._leases.values():
                if intervals_conflict(
                    lease.components, lease.start_time, lease.end_time,
                    existing.components, existing.start_time, existing.end_time,
                ):
                    return existing
        # Requests may also self-conflict.
        seen: list[RspecLease] = []
        for lease in requested:
            for prior in seen:
                if intervals_conflict(
                    lease.components, lease.start_time, lease.end_time,
                    prior.components, prior.start_time, prior.end_time,
                ):
                    return SimLease("", None, tuple(prior.components),
                                    prior.start_time, prior.end_time)
            seen.append(lease)
        return None

    def delete(self, urns: list[str], credential_b64: str) -> bool:
        self._gate.authorize(credential_b64, Privilege.delete)
        with self._lock:
            found = [u for u in urns if u in self._leases]
            if not found:
                raise SimFault(FAULT_NOT_FOUND, f"no leases match {urns}")
            for lease_id in found:
                del self._leases[lease_id]
            return True

    def status(self, slice_urn: str, credential_b64: str) -> list[dict]:
        self._gate.authorize(credential_b64, Privilege.resolve)
        with self._lock:
            return [
                {
                    "lease_id": l.lease_id,
                    "status": "accepted",
                    "start_time": l.start_time.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    "end_time": l.end_time.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    "component_ids": list(l.components),
                }
                for l in self._leases.values()
                if l.slice_urn == slice_urn
            ]

    def leases(self) -> list[SimLease]:
        with self._lock:
            return sorted(self._leases.values(), key=lambda l: l.lease_id)

    def oracle_grid(self) -> OccupancyGrid:
        """Brute-force per-minute occupancy over all accepted leases."""
        with self._lock:
            grid = OccupancyGrid()
            for lease in self._leases.values():
                grid.add(lease.components, lease.start_time, lease.end_time)
            return grid


@dataclass
class SimFederation:
    registry: RegistrySim
    ams: dict[str, AmSim]
    fixture: FederationFixture
    root_public_key: bytes

    def am_state_oracle(self, testbed: str) -> OccupancyGrid:
        return self.ams[testbed].oracle_grid()


def build_federation(fixture: FederationFixture, root_public_key: bytes) -> SimFederation:
    """Seed registry and AM state from a fixture: the root authority, a
    monitoring namespace, and one authority plus inventory per testbed."""
    registry = RegistrySim(root_public_key)
    epoch = "2026-01-01T00:00:00Z"
    registry.seed_record(
        Record(hrn=parse_hrn(ROOT_HRN), type=RecordType.authority,
               public_key=root_public_key, created_at=epoch, updated_at=epoch)
    )
    registry.seed_record(
        Record(hrn=parse_hrn(MONITOR_AUTHORITY), type=RecordType.authority,
               created_at=epoch, updated_at=epoch)
    )
    ams: dict[str, AmSim] = {}
    for tb in fixture.testbeds:
        registry.seed_record(
            Record(hrn=parse_hrn(testbed_authority_hrn(tb.name)),
                   type=RecordType.authority, created_at=epoch, updated_at=epoch)
        )
        ams[tb.name] = AmSim(tb, fixture.seed, root_public_key)
    return SimFederation(registry=registry, ams=ams, fixture=fixture,
                         root_public_key=root_public_key)
