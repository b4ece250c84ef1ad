"""Sync handlers and scheduler against the simulated federation."""

from datetime import datetime, timedelta, timezone

import pytest

from fedbroker.engine.events import EventStatus, submit_event
from fedbroker.model import credential_to_base64
from fedbroker.sync import SyncSchedule, SyncScheduler, SyncTarget, default_schedules
from helpers import make_request_rspec, operator_credential, slice_urn

T0 = datetime(2026, 6, 1, 8, 0, tzinfo=timezone.utc)


def test_first_resources_sync_populates_cache(env):
    done = env.sync("resources", "r2lab")
    assert done.status is EventStatus.success
    assert env.store.count("resources", {"testbed": "r2lab"}) == 37
    doc = env.store.query("resources", {"testbed": "r2lab"}, limit=1)[0]
    assert doc.body["resource_type"] == "wifi"
    assert doc.body["exclusive"] is True
    assert isinstance(doc.body["latitude"], float)


def test_sync_authorities_mirrors_registry(env):
    done = env.sync("authorities")
    assert done.status is EventStatus.success
    hrns = {d.id for d in env.store.query("authorities")}
    assert "onelab.r2lab" in hrns
    assert "onelab.monitor" in hrns


def test_resync_with_unchanged_upstream_writes_nothing(env):
    env.sync("resources", "r2lab")
    before = {d.id: d.version for d in env.store.query("resources", {"testbed": "r2lab"})}
    env.sync("resources", "r2lab")
    after = {d.id: d.version for d in env.store.query("resources", {"testbed": "r2lab"})}
    assert before == after
    assert all(v == 1 for v in after.values())


def test_upstream_removal_tombstones_cached_document(env, fast_servers):
    env.sync("resources", "r2lab")
    am_state = fast_servers.federation.ams["r2lab"]
    victim = sorted(am_state.resources)[0]
    del am_state.resources[victim]
    env.sync("resources", "r2lab")
    assert env.store.count("resources", {"testbed": "r2lab"}) == 36
    feed = env.store.changes_since(0, collections=["resources"])
    tombstones = []
    try:
        while True:
            event = feed.get(timeout=0.2)
            if event.deleted:
                tombstones.append(event.id)
    except TimeoutError:
        pass
    feed.close()
    assert victim in tombstones


def test_cache_equals_upstream_after_quiescent_sync(env, fast_servers):
    env.sync("resources", "iotlab")
    am_state = fast_servers.federation.ams["iotlab"]
    cached = {d.id: d.body for d in env.store.query("resources", {"testbed": "iotlab"})}
    assert len(cached) == 2728
    assert set(cached) == set(am_state.resources)
    probe = sorted(cached)[17]
    resource = am_state.resources[probe]
    assert cached[probe] == {
        "component_id": probe,
        "testbed": "iotlab",
        "name": resource.name,
        "resource_type": "sensor",
        "exclusive": True,
        "available": True,
        "latitude": resource.latitude,
        "longitude": resource.longitude,
    }


def test_lease_sync_imports_am_leases(env, fast_servers, root_keys):
    cred = credential_to_base64(operator_credential(root_keys[0]))
    am_state = fast_servers.federation.ams["r2lab"]
    am_state.allocate(slice_urn(), cred,
                      make_request_rspec("r2lab", [1], T0, T0 + timedelta(hours=1)))
    env.sync("leases", "r2lab")
    leases = env.store.query("leases", {"testbed": "r2lab"})
    assert len(leases) == 1
    body = leases[0].body
    assert body["status"] == "accepted"
    assert body["slice"] is None  # the wire carries no slice attribution
    assert body["components"] == ["urn:publicid:IDN+r2lab+node+n0001"]


def test_lease_sync_preserves_broker_known_slice(env, fast_servers, root_keys):
    cred = credential_to_base64(operator_credential(root_keys[0]))
    am_state = fast_servers.federation.ams["r2lab"]
    am_state.allocate(slice_urn(), cred,
                      make_request_rspec("r2lab", [2], T0, T0 + timedelta(hours=1)))
    env.sync("leases", "r2lab")
    lease_doc = env.store.query("leases", {"testbed": "r2lab"})[0]
    # The broker knows which slice this lease belongs to (it created it).
    env.store.upsert("leases", lease_doc.id,
                     dict(lease_doc.body, slice="onelab.upmc.p1.s1"))
    env.sync("leases", "r2lab")
    refreshed = env.store.get("leases", lease_doc.id)
    assert refreshed.body["slice"] == "onelab.upmc.p1.s1"


def test_lease_deleted_at_am_disappears_from_cache(env, fast_servers, root_keys):
    cred = credential_to_base64(operator_credential(root_keys[0]))
    am_state = fast_servers.federation.ams["r2lab"]
    am_state.allocate(slice_urn(), cred,
                      make_request_rspec("r2lab", [3], T0, T0 + timedelta(hours=1)))
    env.sync("leases", "r2lab")
    assert env.store.count("leases", {"testbed": "r2lab"}) == 1
    lease_id = env.store.query("leases", {"testbed": "r2lab"})[0].id
    am_state.delete([lease_id], cred)
    env.sync("leases", "r2lab")
    assert env.store.count("leases", {"testbed": "r2lab"}) == 0


def test_sync_status_documents(env):
    env.sync("resources", "r2lab")
    doc = env.store.get("sync_status", "resources:r2lab")
    assert doc.body["target"] == "resources"
    assert doc.body["testbed"] == "r2lab"
    assert doc.body["duration_ms"] >= 0
    assert doc.body["last_success_at"]


def test_default_schedule_periods():
    schedules = {s.target: s for s in default_schedules()}
    assert schedules[SyncTarget.authorities].period_seconds == 86400
    assert schedules[SyncTarget.leases].period_seconds == 300
    assert schedules[SyncTarget.resources].period_seconds == 3600
    assert not schedules[SyncTarget.authorities].per_testbed
    assert schedules[SyncTarget.leases].per_testbed


def test_schedule_rejects_sub_minimum_period():
    with pytest.raises(ValueError):
        SyncSchedule(SyncTarget.leases, 5, per_testbed=True)


class _RecordingSubmitter:
    def __init__(self):
        self.calls = []

    def __call__(self, event_type, payload, actor):
        self.calls.append((str(event_type.value), payload.get("testbed")))
        return None


def test_scheduler_simulated_sixteen_minutes(tmp_path):
    """Leases at a 300 s period over a simulated 16 minute clock fire at
    least 3 times per testbed (immediate tick + anchored cadence)."""
    from fedbroker.store import DocumentStore

    store = DocumentStore(tmp_path / "db", fsync=False)
    submitter = _RecordingSubmitter()
    clock = {"now": 1000.0}
    scheduler = SyncScheduler(
        [SyncSchedule(SyncTarget.leases, 300, per_testbed=True)],
        submitter, store, ["r2lab", "nitos"],
        time_fn=lambda: clock["now"],
    )
    for _ in range(16 * 60):
        scheduler.run_pending()
        clock["now"] += 1.0
    per_testbed = {}
    for event_type, testbed in submitter.calls:
        assert event_type == "sync.leases"
        per_testbed[testbed] = per_testbed.get(testbed, 0) + 1
    assert per_testbed["r2lab"] >= 3
    assert per_testbed["nitos"] >= 3
    store.close()


def test_scheduler_skips_while_previous_sync_not_terminal(tmp_path):
    from fedbroker.store import DocumentStore

    store = DocumentStore(tmp_path / "db", fsync=False)
    # A sync.leases event for r2lab sits unfinished in the queue.
    submit_event(store, "sync.leases", {"testbed": "r2lab"}, "onelab.portal")
    submitter = _RecordingSubmitter()
    clock = {"now": 0.0}
    scheduler = SyncScheduler(
        [SyncSchedule(SyncTarget.leases, 300, per_testbed=True)],
        submitter, store, ["r2lab", "nitos"],
        time_fn=lambda: clock["now"],
    )
    scheduler.run_pending()
    testbeds = [testbed for _, testbed in submitter.calls]
    assert testbeds == ["nitos"]  # r2lab skipped, no pile-up
    store.close()


def test_scheduler_first_tick_is_immediate(tmp_path):
    from fedbroker.store import DocumentStore

    store = DocumentStore(tmp_path / "db", fsync=False)
    submitter = _RecordingSubmitter()
    scheduler = SyncScheduler(default_schedules(), submitter, store, ["r2lab"],
                              time_fn=lambda: 50.0)
    scheduler.run_pending()
    kinds = {event_type for event_type, _ in submitter.calls}
    assert kinds == {"sync.authorities", "sync.resources", "sync.leases"}
    store.close()


def test_scheduler_requires_schedules(tmp_path):
    from fedbroker.store import DocumentStore

    store = DocumentStore(tmp_path / "db", fsync=False)
    with pytest.raises(ValueError):
        SyncScheduler([], lambda *a: None, store, [])
    store.close()
