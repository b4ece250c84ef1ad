"""Typed events: the persisted unit of asynchronous work.

Every mutation entering the system becomes one event document in the
store's ``events`` collection, validated against a fixed per-type
payload shape before it is accepted. Routing is a pure function of the
event type; the three queues separate fast registry traffic, slow
testbed traffic, and background synchronization.

Payload shapes:

    user.register    {"hrn": str, "email": str}
    project.create   {"hrn": str}
    slice.create     {"hrn": str}
    slice.delete     {"hrn": str}
    lease.create     {"slice_hrn": str, "testbed": str,
                      "component_ids": [str, ...],
                      "start_time": iso-utc, "end_time": iso-utc}
    lease.delete     {"lease_id": str}
    sync.authorities {}
    sync.resources   {"testbed": str}
    sync.leases      {"testbed": str}
"""

from __future__ import annotations

import enum
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone

from ..model import MIN_LEASE_SECONDS, MalformedHrn, MalformedUrn, parse_hrn, parse_urn
from ..store import Document, DocumentStore

EVENTS_COLLECTION = "events"


class EventType(str, enum.Enum):
    user_register = "user.register"
    project_create = "project.create"
    slice_create = "slice.create"
    slice_delete = "slice.delete"
    lease_create = "lease.create"
    lease_delete = "lease.delete"
    sync_authorities = "sync.authorities"
    sync_resources = "sync.resources"
    sync_leases = "sync.leases"


class EventStatus(str, enum.Enum):
    pending = "pending"
    running = "running"
    success = "success"
    error = "error"

    @property
    def terminal(self) -> bool:
        return self in (EventStatus.success, EventStatus.error)


class QueueName(str, enum.Enum):
    registry = "registry"
    testbed = "testbed"
    sync = "sync"


ROUTING: dict[EventType, QueueName] = {
    EventType.user_register: QueueName.registry,
    EventType.project_create: QueueName.registry,
    EventType.slice_create: QueueName.registry,
    EventType.slice_delete: QueueName.registry,
    EventType.lease_create: QueueName.testbed,
    EventType.lease_delete: QueueName.testbed,
    EventType.sync_authorities: QueueName.sync,
    EventType.sync_resources: QueueName.sync,
    EventType.sync_leases: QueueName.sync,
}


def route(event_type: EventType | str) -> QueueName:
    return ROUTING[EventType(event_type)]


@dataclass(frozen=True)
class QueueSpec:
    name: QueueName
    workers: int = 1
    max_attempts: int = 5
    backoff_base_ms: int = 500

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


DEFAULT_QUEUES: dict[QueueName, QueueSpec] = {
    QueueName.registry: QueueSpec(QueueName.registry, workers=2),
    QueueName.testbed: QueueSpec(QueueName.testbed, workers=4),
    QueueName.sync: QueueSpec(QueueName.sync, workers=2),
}


class PayloadInvalid(ValueError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


def _require_str(payload: dict, field: str) -> str:
    value = payload.get(field)
    if not isinstance(value, str) or not value:
        raise PayloadInvalid(field, "required string")
    return value


def _require_hrn(payload: dict, field: str, min_segments: int) -> str:
    text = _require_str(payload, field)
    try:
        hrn = parse_hrn(text)
    except MalformedHrn as exc:
        raise PayloadInvalid(field, str(exc)) from None
    if len(hrn.segments) < min_segments:
        raise PayloadInvalid(field, f"needs at least {min_segments} segments")
    return hrn.render()


def _require_ts(payload: dict, field: str) -> datetime:
    text = _require_str(payload, field)
    try:
        return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    except ValueError:
        raise PayloadInvalid(field, "expected RFC 3339 UTC, e.g. 2026-01-01T10:00:00Z") from None


def _check_no_extras(payload: dict, allowed: set[str]) -> None:
    for key in payload:
        if key not in allowed:
            raise PayloadInvalid(key, "unknown field")


def validate_payload(event_type: EventType, payload: dict) -> dict:
    """Check a payload against its type's shape; returns it unchanged.

    Fails closed: missing fields, malformed values, and unknown fields
    are all rejected.
    """
    if not isinstance(payload, dict):
        raise PayloadInvalid("payload", "must be a JSON object")
    et = EventType(event_type)
    if et is EventType.user_register:
        _check_no_extras(payload, {"hrn", "email"})
        _require_hrn(payload, "hrn", 2)
        email = _require_str(payload, "email")
        if "@" not in email:
            raise PayloadInvalid("email", "not an email address")
    elif et in (EventType.project_create,):
        _check_no_extras(payload, {"hrn"})
        _require_hrn(payload, "hrn", 2)
    elif et in (EventType.slice_create, EventType.slice_delete):
        _check_no_extras(payload, {"hrn"})
        _require_hrn(payload, "hrn", 3)
    elif et is EventType.lease_create:
        _check_no_extras(
            payload, {"slice_hrn", "testbed", "component_ids", "start_time", "end_time"}
        )
        _require_hrn(payload, "slice_hrn", 3)
        _require_str(payload, "testbed")
        components = payload.get("component_ids")
        if not isinstance(components, list) or not components:
            raise PayloadInvalid("component_ids", "required non-empty list")
        for cid in components:
            if not isinstance(cid, str):
                raise PayloadInvalid("component_ids", "entries must be strings")
            try:
                parse_urn(cid)
            except MalformedUrn as exc:
                raise PayloadInvalid("component_ids", str(exc)) from None
        start = _require_ts(payload, "start_time")
        end = _require_ts(payload, "end_time")
        if start >= end:
            raise PayloadInvalid("end_time", "must follow start_time")
        if (end - start).total_seconds() < MIN_LEASE_SECONDS:
            raise PayloadInvalid("end_time", f"lease shorter than {MIN_LEASE_SECONDS}s")
    elif et is EventType.lease_delete:
        _check_no_extras(payload, {"lease_id"})
        _require_str(payload, "lease_id")
    elif et is EventType.sync_authorities:
        _check_no_extras(payload, set())
    else:  # sync.resources, sync.leases
        _check_no_extras(payload, {"testbed"})
        _require_str(payload, "testbed")
    return payload


@dataclass(frozen=True)
class Event:
    event_id: str
    type: EventType
    payload: dict
    status: EventStatus
    attempts: int
    created_at: str
    actor: str
    started_at: str | None = None
    finished_at: str | None = None
    error: dict | None = None
    result: dict | None = None
    not_before: str | None = None
    version: int = 0  # store document version, used for claim CAS

    @property
    def queue(self) -> QueueName:
        return route(self.type)

    @property
    def terminal(self) -> bool:
        return self.status.terminal

    def body(self) -> dict:
        return {
            "event_id": self.event_id,
            "type": self.type.value,
            "payload": self.payload,
            "status": self.status.value,
            "attempts": self.attempts,
            "created_at": self.created_at,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "error": self.error,
            "result": self.result,
            "actor": self.actor,
            "queue": self.queue.value,
            "not_before": self.not_before,
        }

    @classmethod
    def from_document(cls, doc: Document) -> "Event":
        body = doc.body
        return cls(
            event_id=body["event_id"],
            type=EventType(body["type"]),
            payload=body["payload"],
            status=EventStatus(body["status"]),
            attempts=body["attempts"],
            created_at=body["created_at"],
            started_at=body.get("started_at"),
            finished_at=body.get("finished_at"),
            error=body.get("error"),
            result=body.get("result"),
            actor=body["actor"],
            not_before=body.get("not_before"),
            version=doc.version,
        )


def now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def submit_event(store: DocumentStore, event_type: EventType | str, payload: dict,
                 actor: str) -> Event:
    """Validate and persist a new pending event; durable before return."""
    et = EventType(event_type)
    validate_payload(et, payload)
    event = Event(
        event_id=uuid.uuid4().hex,
        type=et,
        payload=payload,
        status=EventStatus.pending,
        attempts=0,
        created_at=now_iso(),
        actor=actor,
    )
    doc = store.upsert(EVENTS_COLLECTION, event.event_id, event.body())
    return Event.from_document(doc)
