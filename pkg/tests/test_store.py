import os
import signal
import struct
import subprocess
import sys
import textwrap
import threading
import time

import pytest

from fedbroker.store import (
    DocumentStore,
    NotFound,
    SeqTooOld,
    VersionConflict,
    encode_log_record,
    iter_log_records,
)


@pytest.fixture()
def store(tmp_path):
    s = DocumentStore(tmp_path / "db", fsync=False)
    yield s
    s.close()


def test_first_upsert_is_version_one(store):
    doc = store.upsert("projects", "onelab.upmc.p1", {"hrn": "onelab.upmc.p1"})
    assert doc.version == 1
    assert doc.seq == 1


def test_second_upsert_bumps_version_and_seq(store):
    first = store.upsert("projects", "p", {"n": 1})
    second = store.upsert("projects", "p", {"n": 2})
    assert second.version == first.version + 1
    assert second.seq > first.seq


def test_stale_expected_version_conflicts(store):
    store.upsert("projects", "p", {"n": 1})
    store.upsert("projects", "p", {"n": 2})
    with pytest.raises(VersionConflict) as exc:
        store.upsert("projects", "p", {"n": 3}, expected_version=1)
    assert exc.value.current_version == 2


def test_exactly_one_concurrent_writer_wins(store):
    store.upsert("projects", "p", {"n": 0})
    outcomes = []
    barrier = threading.Barrier(2)

    def writer(tag):
        barrier.wait()
        try:
            store.upsert("projects", "p", {"n": tag}, expected_version=1)
            outcomes.append(("ok", tag))
        except VersionConflict as exc:
            outcomes.append(("conflict", exc.current_version))

    threads = [threading.Thread(target=writer, args=(i,)) for i in (1, 2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(o[0] for o in outcomes) == ["conflict", "ok"]
    assert ("conflict", 2) in outcomes


def test_get_round_trip_and_not_found(store):
    store.upsert("users", "u", {"email": "a@b"})
    assert store.get("users", "u").body == {"email": "a@b"}
    with pytest.raises(NotFound):
        store.get("users", "nope")


def test_tombstone_hidden_from_get_but_in_feed(store):
    store.upsert("users", "u", {"email": "a@b"})
    store.delete("users", "u")
    with pytest.raises(NotFound):
        store.get("users", "u")
    sub = store.changes_since(0)
    seen = [sub.get(timeout=1), sub.get(timeout=1)]
    assert [e.deleted for e in seen] == [False, True]
    sub.close()


def test_delete_missing_raises(store):
    with pytest.raises(NotFound):
        store.delete("users", "ghost")


def test_reupsert_after_delete_resumes_versioning(store):
    store.upsert("users", "u", {"n": 1})
    tomb = store.delete("users", "u")
    revived = store.upsert("users", "u", {"n": 2})
    assert revived.version == tomb.version + 1
    assert store.get("users", "u").body == {"n": 2}


def test_query_filters_orders_and_paginates(store):
    for k in range(25):
        store.upsert("resources", f"node-{k:03d}", {"testbed": "r2lab" if k % 2 else "nitos"})
    r2lab = store.query("resources", {"testbed": "r2lab"})
    assert len(r2lab) == 12
    assert [d.id for d in r2lab] == sorted(d.id for d in r2lab)
    page0 = store.query("resources", limit=10, offset=0)
    page1 = store.query("resources", limit=10, offset=10)
    assert len(page0) == len(page1) == 10
    assert not {d.id for d in page0} & {d.id for d in page1}
    everything = store.query("resources")
    assert [d.id for d in page0 + page1] == [d.id for d in everything[:20]]
    assert store.query("unknown") == []
    assert store.count("resources", {"testbed": "nonesuch"}) == 0


def test_rejects_bad_collection_and_body(store):
    with pytest.raises(ValueError):
        store.upsert("Nope", "x", {})
    with pytest.raises(TypeError):
        store.upsert("users", "x", [1, 2])


def test_changes_since_zero_sees_all_writes_in_order(store):
    for k in range(3):
        store.upsert("events", f"e{k}", {"k": k})
    sub = store.changes_since(0)
    seen = [sub.get(timeout=1) for _ in range(3)]
    assert [e.id for e in seen] == ["e0", "e1", "e2"]
    assert [e.seq for e in seen] == sorted(e.seq for e in seen)
    sub.close()


def test_live_subscriber_receives_new_write(store):
    sub = store.changes_since(store.last_seq)
    store.upsert("events", "live", {"x": 1})
    event = sub.get(timeout=2)
    assert event.id == "live"
    sub.close()


def test_collection_filter(store):
    sub = store.changes_since(0, collections=["leases"])
    store.upsert("users", "u", {})
    store.upsert("leases", "l", {})
    event = sub.get(timeout=1)
    assert event.collection == "leases"
    sub.close()


def test_concurrent_soak_no_gaps_no_duplicates(store):
    """1000 interleaved writes from 8 writers: a subscriber sees every
    event exactly once with strictly increasing seq."""
    sub = store.changes_since(0, buffer=5000)
    errors = []

    def writer(tag):
        try:
            for k in range(125):
                store.upsert("events", f"w{tag}-{k}", {"tag": tag, "k": k})
        except Exception as exc:  # pragma: no cover - diagnostic
            errors.append(exc)

    threads = [threading.Thread(target=writer, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    seen = [sub.get(timeout=5) for _ in range(1000)]
    seqs = [e.seq for e in seen]
    assert len(seqs) == 1000
    assert seqs == sorted(seqs)
    assert len(set(seqs)) == 1000
    ids = {e.id for e in seen}
    assert len(ids) == 1000
    sub.close()


def test_per_document_versions_have_no_gaps(store):
    for k in range(10):
        store.upsert("users", "u", {"k": k})
    sub = store.changes_since(0)
    versions = [sub.get(timeout=1).version for _ in range(10)]
    assert versions == list(range(1, 11))
    sub.close()


def test_seq_too_old_past_retention(tmp_path):
    store = DocumentStore(tmp_path / "db", retention=5, fsync=False)
    for k in range(10):
        store.upsert("users", f"u{k}", {})
    with pytest.raises(SeqTooOld) as exc:
        store.changes_since(0)
    assert exc.value.first_retained == 6
    sub = store.changes_since(5)
    assert [sub.get(timeout=1).seq for _ in range(5)] == [6, 7, 8, 9, 10]
    store.close()


def test_lagging_subscriber_disconnected(store):
    sub = store.changes_since(0, buffer=4)
    for k in range(10):
        store.upsert("users", f"u{k}", {})
    with pytest.raises(SeqTooOld):
        for _ in range(10):
            sub.get(timeout=0.1)


def test_log_replay_reproduces_byte_identical_state(tmp_path, store):
    for k in range(20):
        store.upsert("resources", f"n{k}", {"testbed": "r2lab", "k": k})
    store.upsert("resources", "n3", {"testbed": "r2lab", "k": 333})
    store.delete("resources", "n4")
    replayed = DocumentStore(tmp_path / "replay", fsync=False)
    with open(store._log_path, "rb") as fh:
        for doc, _ in iter_log_records(fh):
            replayed._docs.setdefault(doc.collection, {})[doc.id] = doc
    originals = {
        (d.collection, d.id): encode_log_record(d)
        for coll in store._docs.values()
        for d in coll.values()
    }
    copies = {
        (d.collection, d.id): encode_log_record(d)
        for coll in replayed._docs.values()
        for d in coll.values()
    }
    assert originals == copies
    replayed.close()


def test_reopen_recovers_state_and_feed(tmp_path):
    path = tmp_path / "db"
    store = DocumentStore(path, fsync=False)
    for k in range(12):
        store.upsert("users", f"u{k}", {"k": k})
    store.delete("users", "u3")
    store.snapshot()
    store.upsert("users", "u99", {"k": 99})
    # Abandon without close, as a crash would.
    reopened = DocumentStore(path, fsync=False)
    assert reopened.last_seq == store.last_seq
    assert reopened.get("users", "u99").body == {"k": 99}
    with pytest.raises(NotFound):
        reopened.get("users", "u3")
    sub = reopened.changes_since(0)
    seqs = [sub.get(timeout=1).seq for _ in range(14)]
    assert seqs == list(range(1, 15))
    store.close()
    reopened.close()


def test_torn_tail_is_truncated(tmp_path):
    path = tmp_path / "db"
    store = DocumentStore(path, fsync=False)
    store.upsert("users", "u", {"k": 1})
    store.close()
    with open(path / "store.log", "ab") as fh:
        fh.write(struct.pack(">I", 500) + b'{"partial')
    reopened = DocumentStore(path, fsync=False)
    assert reopened.last_seq == 1
    doc = reopened.upsert("users", "u", {"k": 2})
    assert doc.version == 2
    reopened.close()
    with open(path / "store.log", "rb") as fh:
        records = list(iter_log_records(fh))
    assert [d.version for d, _ in records] == [1, 2]


KILL_SOAK = textwrap.dedent(
    """
    import sys
    from fedbroker.store import DocumentStore

    store = DocumentStore(sys.argv[1])
    k = 0
    while True:
        doc = store.upsert("events", f"e{k:06d}", {"k": k})
        print(doc.id, flush=True)
        k += 1
    """
)


def test_sigkill_mid_soak_loses_no_acknowledged_write(tmp_path):
    """Writes acknowledged before a SIGKILL are all present on reopen."""
    path = tmp_path / "db"
    proc = subprocess.Popen(
        [sys.executable, "-c", KILL_SOAK, str(path)],
        stdout=subprocess.PIPE,
        text=True,
    )
    acked = []
    deadline = time.time() + 10
    while len(acked) < 200 and time.time() < deadline:
        line = proc.stdout.readline().strip()
        if line:
            acked.append(line)
    os.kill(proc.pid, signal.SIGKILL)
    proc.wait()
    assert len(acked) >= 200
    store = DocumentStore(path)
    for doc_id in acked:
        assert store.get("events", doc_id).body["k"] == int(doc_id[1:])
    store.close()


def test_read_your_writes(store):
    doc = store.upsert("users", "me", {"v": 1})
    assert store.get("users", "me").version >= doc.version
