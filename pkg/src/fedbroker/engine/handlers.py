"""Registry and testbed event handlers.

Handlers are the only code that talks to backends. They authorize the
acting user against stored credentials, perform the remote call, and
write the outcome back into the cache. Delivery is at-least-once, so
each handler treats its natural key (hrn, lease digest) as the
idempotency anchor: a duplicate answer on a retry attempt means the
previous attempt already succeeded and is completed locally instead of
failing.

Documents written here:

    users     {hrn, email, public_key, private_key, credentials: [b64...]}
    projects  {hrn, authority, members, created_at}
    slices    {hrn, project, members, created_at}
    leases    {lease_id, slice, testbed, components, start_time,
               end_time, status}
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    NoEncryption,
    PrivateFormat,
)

from ..model import (
    Credential,
    CredentialError,
    Hrn,
    Privilege,
    RSpec,
    RspecLease,
    RspecVariant,
    Record,
    RecordType,
    credential_from_base64,
    credential_to_base64,
    generate_keypair,
    hrn_to_urn,
    issue_credential,
    lease_digest,
    parse_hrn,
    verify_credential,
)
from ..sfa import AmClient, RegistryClient, SfaError
from ..sfa.faults import (
    CredentialRejected,
    DuplicateHrn,
    LeaseConflict,
    RecordNotFound,
)
from ..store import DocumentStore, NotFound, VersionConflict
from .engine import HandlerError
from .events import Event, EventType

USER_CREDENTIAL_TTL = 30 * 86400
OPERATOR_HRN = "onelab.portal"


@dataclass
class HandlerContext:
    """Everything a handler needs: cache, clients, keys, resubmission."""

    store: DocumentStore
    registry: RegistryClient
    ams: dict[str, AmClient]
    root_private_key: Ed25519PrivateKey
    root_public_key: bytes
    operator_credential: Credential
    root_hrn: Hrn = field(default_factory=lambda: parse_hrn("onelab"))
    submit: Callable[..., object] | None = None

    def am_for(self, testbed: str) -> AmClient:
        try:
            return self.ams[testbed]
        except KeyError:
            raise HandlerError("UnknownComponent", f"no endpoint for testbed {testbed}",
                               retriable=False) from None

    def resubmit(self, event_type: EventType, payload: dict) -> None:
        if self.submit is not None:
            self.submit(event_type, payload, OPERATOR_HRN)

    def backend_calls(self) -> int:
        return self.registry.calls + sum(am.calls for am in self.ams.values())


def _remote_error(exc: SfaError, *, target: str) -> HandlerError:
    if isinstance(exc, DuplicateHrn):
        return HandlerError("DuplicateHrn", str(exc), retriable=False)
    if isinstance(exc, RecordNotFound):
        return HandlerError("NotFound", str(exc), retriable=False)
    if isinstance(exc, CredentialRejected):
        return HandlerError("CredentialRejected", str(exc), retriable=False)
    if isinstance(exc, LeaseConflict):
        return HandlerError("LeaseConflict", str(exc), retriable=False)
    code = "RegistryUnavailable" if target == "registry" else "AmUnavailable"
    return HandlerError(code, str(exc), retriable=exc.retriable)


# -- credential plumbing --------------------------------------------------------


def _user_document(ctx: HandlerContext, actor: str) -> dict:
    try:
        return ctx.store.get("users", actor).body
    except NotFound:
        raise HandlerError("CredentialRejected", f"{actor} has no account",
                           retriable=False) from None


def _find_credential(ctx: HandlerContext, actor: str, privilege: Privilege,
                     scope: Hrn) -> Credential:
    """A stored credential of the actor granting ``privilege`` over
    ``scope`` (the credential object may be any ancestor)."""
    user = _user_document(ctx, actor)
    for encoded in user.get("credentials", ()):
        try:
            cred = credential_from_base64(encoded)
            privileges = verify_credential(cred, ctx.root_public_key)
        except (ValueError, CredentialError):
            continue
        if privilege in privileges and cred.object.is_ancestor_of(scope):
            return cred
    raise HandlerError(
        "CredentialRejected",
        f"{actor} holds no credential granting {privilege.value} on {scope.render()}",
        retriable=False,
    )


def _grant(ctx: HandlerContext, actor: str, object_hrn: Hrn,
           object_type: RecordType, privileges: frozenset[Privilege]) -> None:
    """Issue a root-signed credential to the actor and store it on the
    user document. Idempotent per (actor, object): re-running a handler
    never piles up duplicate grants. Contended writes retry on CAS."""
    for _ in range(10):
        doc = ctx.store.get("users", actor)
        if _has_grant(ctx, doc.body, object_hrn, object_type):
            return
        user_key = base64.b64decode(doc.body["public_key"])
        cred = issue_credential(
            ctx.root_private_key,
            subject=parse_hrn(actor),
            object=object_hrn,
            object_type=object_type,
            privileges=privileges,
            ttl_seconds=USER_CREDENTIAL_TTL,
            issuer=ctx.root_hrn,
            subject_key=user_key,
        )
        body = dict(doc.body)
        body["credentials"] = list(body.get("credentials", ())) + [credential_to_base64(cred)]
        try:
            ctx.store.upsert("users", actor, body, expected_version=doc.version)
            return
        except VersionConflict:
            continue
    raise HandlerError("internal", f"could not persist credential for {actor}",
                       retriable=True)


def _has_grant(ctx: HandlerContext, user_body: dict, object_hrn: Hrn,
               object_type: RecordType) -> bool:
    for encoded in user_body.get("credentials", ()):
        try:
            cred = credential_from_base64(encoded)
        except ValueError:
            continue
        if cred.object == object_hrn and cred.object_type == object_type:
            return True
    return False


def _completed_by_earlier_attempt(ctx: HandlerContext, event: Event, collection: str,
                                  hrn: str) -> bool:
    """A retry finding its own natural key already cached means the prior
    attempt got through; ownership is checked so a racing creation of the
    same hrn by someone else still surfaces as DuplicateHrn."""
    if not _is_retry(event):
        return False
    try:
        body = ctx.store.get(collection, hrn).body
    except NotFound:
        return False
    if collection == "users":
        return body.get("email") == event.payload.get("email")
    return event.actor in body.get("members", ())


def _is_retry(event: Event) -> bool:
    return event.attempts > 1


def _ts(dt_text: str) -> datetime:
    return datetime.strptime(dt_text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


# -- registry handlers ------------------------------------------------------------


def handle_user_register(ctx: HandlerContext, event: Event) -> dict:
    hrn = event.payload["hrn"]
    email = event.payload["email"]
    if _completed_by_earlier_attempt(ctx, event, "users", hrn):
        _grant(ctx, hrn, parse_hrn(hrn).parent(), RecordType.authority,
               frozenset({Privilege.register, Privilege.resolve, Privilege.list_resources}))
        return {"hrn": hrn}
    private_key, public_key = generate_keypair()
    record = Record(hrn=parse_hrn(hrn), type=RecordType.user, email=email,
                    public_key=public_key)
    try:
        registered = ctx.registry.register(record, ctx.operator_credential)
    except DuplicateHrn as exc:
        # Accounts are created exactly once; on a retry the previous
        # attempt may have registered before crashing.
        if not (_is_retry(event) and ctx.store.count("users", {"hrn": hrn}) == 0):
            raise _remote_error(exc, target="registry") from None
        registered = ctx.registry.resolve(hrn, ctx.operator_credential)
    except SfaError as exc:
        raise _remote_error(exc, target="registry") from None
    ctx.store.upsert(
        "users",
        hrn,
        {
            "hrn": hrn,
            "email": email,
            "public_key": base64.b64encode(public_key).decode("ascii"),
            "private_key": base64.b64encode(
                private_key.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption())
            ).decode("ascii"),
            "credentials": [],
            "created_at": registered.created_at,
        },
    )
    _grant(ctx, hrn, parse_hrn(hrn).parent(), RecordType.authority,
           frozenset({Privilege.register, Privilege.resolve, Privilege.list_resources}))
    return {"hrn": hrn}


def handle_project_create(ctx: HandlerContext, event: Event) -> dict:
    hrn = event.payload["hrn"]
    actor = event.actor
    parent = parse_hrn(hrn).parent()
    if _completed_by_earlier_attempt(ctx, event, "projects", hrn):
        _grant(ctx, actor, parse_hrn(hrn), RecordType.project,
               frozenset({Privilege.register, Privilege.resolve, Privilege.allocate,
                          Privilege.delete}))
        return {"hrn": hrn}
    credential = _find_credential(ctx, actor, Privilege.register, parent)
    record = Record(hrn=parse_hrn(hrn), type=RecordType.project, members=(actor,))
    try:
        registered = ctx.registry.register(record, credential)
    except DuplicateHrn as exc:
        if not (_is_retry(event) and ctx.store.count("projects", {"hrn": hrn}) == 0):
            raise _remote_error(exc, target="registry") from None
        registered = ctx.registry.resolve(hrn, ctx.operator_credential)
    except SfaError as exc:
        raise _remote_error(exc, target="registry") from None
    ctx.store.upsert(
        "projects",
        hrn,
        {
            "hrn": hrn,
            "authority": parent.render(),
            "members": [actor],
            "created_at": registered.created_at,
        },
    )
    _grant(ctx, actor, parse_hrn(hrn), RecordType.project,
           frozenset({Privilege.register, Privilege.resolve, Privilege.allocate,
                      Privilege.delete}))
    return {"hrn": hrn}


def handle_slice_create(ctx: HandlerContext, event: Event) -> dict:
    hrn = event.payload["hrn"]
    actor = event.actor
    project_hrn = parse_hrn(hrn).parent()
    if _completed_by_earlier_attempt(ctx, event, "slices", hrn):
        _grant(ctx, actor, parse_hrn(hrn), RecordType.slice,
               frozenset({Privilege.allocate, Privilege.delete, Privilege.resolve}))
        return {"hrn": hrn}
    try:
        project = ctx.store.get("projects", project_hrn.render()).body
    except NotFound:
        raise HandlerError("ParentNotFound", f"project {project_hrn.render()} not found",
                           retriable=False) from None
    if actor not in project.get("members", ()):
        raise HandlerError("CredentialRejected",
                           f"{actor} is not a member of {project_hrn.render()}",
                           retriable=False)
    credential = _find_credential(ctx, actor, Privilege.register, project_hrn)
    record = Record(hrn=parse_hrn(hrn), type=RecordType.slice, members=(actor,))
    try:
        registered = ctx.registry.register(record, credential)
    except DuplicateHrn as exc:
        if not (_is_retry(event) and ctx.store.count("slices", {"hrn": hrn}) == 0):
            raise _remote_error(exc, target="registry") from None
        registered = ctx.registry.resolve(hrn, ctx.operator_credential)
    except SfaError as exc:
        raise _remote_error(exc, target="registry") from None
    ctx.store.upsert(
        "slices",
        hrn,
        {
            "hrn": hrn,
            "project": project_hrn.render(),
            "members": [actor],
            "created_at": registered.created_at,
        },
    )
    _grant(ctx, actor, parse_hrn(hrn), RecordType.slice,
           frozenset({Privilege.allocate, Privilege.delete, Privilege.resolve}))
    return {"hrn": hrn}


def handle_slice_delete(ctx: HandlerContext, event: Event) -> dict:
    hrn = event.payload["hrn"]
    try:
        ctx.store.get("slices", hrn)
    except NotFound:
        raise HandlerError("NotFound", f"slice {hrn} not in cache", retriable=False) from None
    credential = _find_credential(ctx, event.actor, Privilege.register,
                                  parse_hrn(hrn).parent())
    try:
        ctx.registry.remove(hrn, RecordType.slice.value, credential)
    except RecordNotFound:
        if not _is_retry(event):
            raise HandlerError("NotFound", f"registry has no slice {hrn}",
                               retriable=False) from None
    except SfaError as exc:
        raise _remote_error(exc, target="registry") from None
    ctx.store.delete("slices", hrn)
    return {"hrn": hrn}


# -- testbed handlers ------------------------------------------------------------


def handle_lease_create(ctx: HandlerContext, event: Event) -> dict:
    payload = event.payload
    slice_hrn = payload["slice_hrn"]
    testbed = payload["testbed"]
    components = list(payload["component_ids"])
    start, end = _ts(payload["start_time"]), _ts(payload["end_time"])
    # Fail fast against the cache before any AM call.
    for cid in components:
        try:
            cached = ctx.store.get("resources", cid).body
        except NotFound:
            raise HandlerError("UnknownComponent", f"{cid} not in resource cache",
                               retriable=False) from None
        if cached.get("testbed") != testbed:
            raise HandlerError("UnknownComponent",
                               f"{cid} belongs to {cached.get('testbed')}, not {testbed}",
                               retriable=False)
    credential = _find_credential(ctx, event.actor, Privilege.allocate,
                                  parse_hrn(slice_hrn))
    am = ctx.am_for(testbed)
    slice_urn = hrn_to_urn(parse_hrn(slice_hrn), RecordType.slice).render()
    request = RSpec(RspecVariant.request,
                    leases=(RspecLease(tuple(components), start, end),))
    lease_id = lease_digest(testbed, components, start, end)
    try:
        am.allocate(slice_urn, credential, request)
    except LeaseConflict as exc:
        # On a retry the conflict may be the lease we placed before crashing.
        if not (_is_retry(event) and _am_has_lease(am, slice_urn, credential, lease_id)):
            raise _remote_error(exc, target="am") from None
    except SfaError as exc:
        raise _remote_error(exc, target="am") from None
    ctx.store.upsert(
        "leases",
        lease_id,
        {
            "lease_id": lease_id,
            "slice": slice_hrn,
            "testbed": testbed,
            "components": sorted(components),
            "start_time": payload["start_time"],
            "end_time": payload["end_time"],
            "status": "accepted",
        },
    )
    ctx.resubmit(EventType.sync_leases, {"testbed": testbed})
    return {"lease_id": lease_id}


def _am_has_lease(am: AmClient, slice_urn: str, credential: Credential, lease_id: str) -> bool:
    try:
        return any(s.get("lease_id") == lease_id for s in am.status(slice_urn, credential))
    except SfaError:
        return False


def handle_lease_delete(ctx: HandlerContext, event: Event) -> dict:
    lease_id = event.payload["lease_id"]
    try:
        lease = ctx.store.get("leases", lease_id).body
    except NotFound:
        raise HandlerError("NotFound", f"no lease {lease_id}", retriable=False) from None
    slice_hrn = lease.get("slice")
    if not slice_hrn:
        raise HandlerError("CredentialRejected",
                           f"lease {lease_id} was not created through this portal",
                           retriable=False)
    credential = _find_credential(ctx, event.actor, Privilege.delete, parse_hrn(slice_hrn))
    am = ctx.am_for(lease["testbed"])
    try:
        am.delete([lease_id], credential)
    except RecordNotFound:
        if not _is_retry(event):
            raise HandlerError("NotFound", f"AM has no lease {lease_id}",
                               retriable=False) from None
    except SfaError as exc:
        raise _remote_error(exc, target="am") from None
    ctx.store.delete("leases", lease_id)
    ctx.resubmit(EventType.sync_leases, {"testbed": lease["testbed"]})
    return {"lease_id": lease_id}


def build_handlers(ctx: HandlerContext) -> dict[EventType, Callable[[Event], dict]]:
    """Bind the registry/testbed handlers to a context; sync handlers are
    registered separately by the sync service."""
    import functools

    table = {
        EventType.user_register: handle_user_register,
        EventType.project_create: handle_project_create,
        EventType.slice_create: handle_slice_create,
        EventType.slice_delete: handle_slice_delete,
        EventType.lease_create: handle_lease_create,
        EventType.lease_delete: handle_lease_delete,
    }
    return {et: functools.partial(fn, ctx) for et, fn in table.items()}
