"""Cache refresh handlers: pull upstream state, reconcile collections.

Reconciliation writes only on change (deep compare before upsert) so
the change feed stays quiet across no-op refreshes, and tombstones
documents that vanished upstream. Each successful run writes a sync
status document: {target, testbed, last_success_at, duration_ms}.
"""

from __future__ import annotations

import functools
import time
from typing import Callable

from ..engine.events import Event, EventType, now_iso
from ..engine.handlers import HandlerContext, _remote_error
from ..model import lease_digest
from ..sfa import SfaError
from ..store import DocumentStore

SYNC_STATUS_COLLECTION = "sync_status"


def _reconcile(store: DocumentStore, collection: str, scope_filter: dict,
               desired: dict[str, dict], preserve: tuple[str, ...] = ()) -> dict:
    """Make ``collection`` (within scope_filter) equal to ``desired``.

    ``preserve`` names fields the upstream payload does not carry (the
    broker knows them from its own writes); existing values survive."""
    existing = {doc.id: doc for doc in store.query(collection, scope_filter)}
    changed = removed = 0
    for doc_id, body in desired.items():
        current = existing.get(doc_id)
        if current is not None:
            for key in preserve:
                if body.get(key) is None and current.body.get(key) is not None:
                    body[key] = current.body[key]
        if current is None or current.body != body:
            store.upsert(collection, doc_id, body)
            changed += 1
    for doc_id in existing.keys() - desired.keys():
        store.delete(collection, doc_id)
        removed += 1
    return {"count": len(desired), "changed": changed, "removed": removed}


def _write_status(store: DocumentStore, target: str, testbed: str | None,
                  duration_ms: int, stats: dict) -> None:
    scope = testbed or "registry"
    store.upsert(
        SYNC_STATUS_COLLECTION,
        f"{target}:{scope}",
        {
            "target": target,
            "testbed": scope,
            "last_success_at": now_iso(),
            "duration_ms": duration_ms,
            **stats,
        },
    )


def handle_sync_authorities(ctx: HandlerContext, event: Event) -> dict:
    started = time.monotonic()
    try:
        records = ctx.registry.list(ctx.root_hrn.render(), ctx.operator_credential)
    except SfaError as exc:
        raise _remote_error(exc, target="registry") from None
    desired = {
        record.hrn.render(): {
            "hrn": record.hrn.render(),
            "name": record.hrn.leaf,
            "type": record.type.value,
            "created_at": record.created_at,
        }
        for record in records
    }
    stats = _reconcile(ctx.store, "authorities", {}, desired)
    duration_ms = int((time.monotonic() - started) * 1000)
    _write_status(ctx.store, "authorities", None, duration_ms, stats)
    return {**stats, "duration_ms": duration_ms}


def handle_sync_resources(ctx: HandlerContext, event: Event) -> dict:
    testbed = event.payload["testbed"]
    am = ctx.am_for(testbed)
    started = time.monotonic()
    try:
        advertisement = am.list_resources(ctx.operator_credential)
    except SfaError as exc:
        raise _remote_error(exc, target="am") from None
    desired = {}
    for node in advertisement.nodes:
        cid = node.component_id.render()
        desired[cid] = {
            "component_id": cid,
            "testbed": testbed,
            "name": node.name,
            "resource_type": node.resource_type,
            "exclusive": node.exclusive,
            "available": node.available,
            "latitude": node.latitude,
            "longitude": node.longitude,
        }
    stats = _reconcile(ctx.store, "resources", {"testbed": testbed}, desired)
    duration_ms = int((time.monotonic() - started) * 1000)
    _write_status(ctx.store, "resources", testbed, duration_ms, stats)
    return {**stats, "duration_ms": duration_ms}


def handle_sync_leases(ctx: HandlerContext, event: Event) -> dict:
    testbed = event.payload["testbed"]
    am = ctx.am_for(testbed)
    started = time.monotonic()
    try:
        advertisement = am.list_resources(ctx.operator_credential)
    except SfaError as exc:
        raise _remote_error(exc, target="am") from None
    desired = {}
    for lease in advertisement.leases:
        start = lease.start_time.strftime("%Y-%m-%dT%H:%M:%SZ")
        end = lease.end_time.strftime("%Y-%m-%dT%H:%M:%SZ")
        lease_id = lease_digest(testbed, lease.components, lease.start_time, lease.end_time)
        desired[lease_id] = {
            "lease_id": lease_id,
            "testbed": testbed,
            "components": sorted(lease.components),
            "start_time": start,
            "end_time": end,
            "status": "accepted",
            "slice": None,
        }
    # The wire carries no slice attribution; broker-created leases keep it.
    stats = _reconcile(ctx.store, "leases", {"testbed": testbed}, desired,
                       preserve=("slice",))
    duration_ms = int((time.monotonic() - started) * 1000)
    _write_status(ctx.store, "leases", testbed, duration_ms, stats)
    return {**stats, "duration_ms": duration_ms}


def build_sync_handlers(ctx: HandlerContext) -> dict[EventType, Callable[[Event], dict]]:
    return {
        EventType.sync_authorities: functools.partial(handle_sync_authorities, ctx),
        EventType.sync_resources: functools.partial(handle_sync_resources, ctx),
        EventType.sync_leases: functools.partial(handle_sync_leases, ctx),
    }
