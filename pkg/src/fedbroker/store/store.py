"""Embedded versioned document store with a monotonic change feed.

Every committed write appends one length-prefixed JSON record to an
append-only log and becomes visible in memory before the call returns;
a periodic snapshot bounds recovery time. Writes are serialized through
one internal lock so sequence numbers are assigned race-free; any number
of threads may read or subscribe concurrently.

Log record format (the replay contract): 4-byte big-endian payload
length, then UTF-8 JSON with keys in exactly this order:

    {"seq": ..., "collection": ..., "id": ..., "version": ...,
     "deleted": ..., "body": {...}, "updated_at": "..."}

Replaying the log into an empty store reproduces the byte-identical
latest state.
"""

from __future__ import annotations

import json
import os
import queue
import re
import struct
import threading
from collections import deque
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

__all__ = [
    "Document",
    "ChangeEvent",
    "DocumentStore",
    "Subscription",
    "NotFound",
    "VersionConflict",
    "SeqTooOld",
    "SubscriptionClosed",
    "encode_log_record",
    "iter_log_records",
]

_COLLECTION_RE = re.compile(r"[a-z_]+\Z")

DEFAULT_RETENTION = 100_000


class NotFound(KeyError):
    def __init__(self, collection: str, id: str):
        super().__init__(f"{collection}/{id}")
        self.collection = collection
        self.id = id


class VersionConflict(Exception):
    def __init__(self, current_version: int):
        super().__init__(f"current version is {current_version}")
        self.current_version = current_version


class SeqTooOld(Exception):
    def __init__(self, first_retained: int):
        super().__init__(f"feed retained from seq {first_retained}; re-bootstrap via query")
        self.first_retained = first_retained


class SubscriptionClosed(Exception):
    pass


@dataclass(frozen=True)
class Document:
    collection: str
    id: str
    version: int
    seq: int
    body: dict
    updated_at: str
    deleted: bool = False


@dataclass(frozen=True)
class ChangeEvent:
    seq: int
    collection: str
    id: str
    version: int
    deleted: bool
    body: dict


def _now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def encode_log_record(doc: Document) -> bytes:
    payload = json.dumps(
        {
            "seq": doc.seq,
            "collection": doc.collection,
            "id": doc.id,
            "version": doc.version,
            "deleted": doc.deleted,
            "body": doc.body,
            "updated_at": doc.updated_at,
        },
        separators=(",", ":"),
        ensure_ascii=False,
    ).encode("utf-8")
    return struct.pack(">I", len(payload)) + payload


def iter_log_records(fh: BinaryIO) -> Iterator[tuple[Document, int]]:
    """Yield (document, end_offset) pairs, stopping at the first torn or
    corrupt record so a crashed tail never poisons recovery."""
    offset = 0
    while True:
        header = fh.read(4)
        if len(header) < 4:
            return
        (length,) = struct.unpack(">I", header)
        payload = fh.read(length)
        if len(payload) < length:
            return
        try:
            raw = json.loads(payload.decode("utf-8"))
            doc = Document(
                collection=raw["collection"],
                id=raw["id"],
                version=raw["version"],
                seq=raw["seq"],
                body=raw["body"],
                updated_at=raw["updated_at"],
                deleted=raw["deleted"],
            )
        except (ValueError, KeyError, UnicodeDecodeError):
            return
        offset += 4 + length
        yield doc, offset


class Subscription:
    """Ordered change stream: a backlog replay followed by live events.

    Live events buffer in a bounded queue; a consumer lagging past the
    buffer is disconnected and sees SeqTooOld on its next read.
    """

    def __init__(self, store: "DocumentStore", backlog: list[ChangeEvent],
                 collections: frozenset[str] | None, maxsize: int):
        self._store = store
        self._backlog = deque(backlog)
        self._collections = collections
        self._queue: queue.Queue[ChangeEvent] = queue.Queue(maxsize)
        self._overflowed = False
        self._closed = False

    def _offer(self, event: ChangeEvent) -> None:
        # Called under the store commit lock.
        if self._closed or self._overflowed:
            return
        if self._collections is not None and event.collection not in self._collections:
            return
        try:
            self._queue.put_nowait(event)
        except queue.Full:
            self._overflowed = True
            self._store._unsubscribe(self)

    def get(self, timeout: float | None = None) -> ChangeEvent:
        if self._backlog:
            return self._backlog.popleft()
        if self._overflowed:
            raise SeqTooOld(self._store.first_retained_seq())
        if self._closed:
            raise SubscriptionClosed()
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            if self._overflowed:
                raise SeqTooOld(self._store.first_retained_seq()) from None
            if self._closed:
                raise SubscriptionClosed() from None
            raise TimeoutError() from None

    def __iter__(self) -> Iterator[ChangeEvent]:
        while True:
            try:
                yield self.get()
            except SubscriptionClosed:
                return

    def close(self) -> None:
        self._closed = True
        self._store._unsubscribe(self)


class DocumentStore:
    def __init__(
        self,
        root: str | Path,
        *,
        retention: int = DEFAULT_RETENTION,
        snapshot_every: int = 1000,
        fsync: bool = True,
    ):
        self._root = Path(root)
        self._root.mkdir(parents=True, exist_ok=True)
        self._log_path = self._root / "store.log"
        self._snapshot_path = self._root / "snapshot.json"
        self._retention = retention
        self._snapshot_every = snapshot_every
        self._fsync = fsync
        self._lock = threading.RLock()
        self._docs: dict[str, dict[str, Document]] = {}
        self._seq = 0
        self._commits_since_snapshot = 0
        self._feed: deque[ChangeEvent] = deque()
        self._subs: list[Subscription] = []
        self._recover()
        self._log_fh = open(self._log_path, "ab")

    # -- recovery ------------------------------------------------------------

    def _recover(self) -> None:
        replay_from = 0
        if self._snapshot_path.exists():
            with open(self._snapshot_path, encoding="utf-8") as fh:
                snap = json.load(fh)
            replay_from = snap["seq"]
            for raw in snap["documents"]:
                doc = Document(**raw)
                self._docs.setdefault(doc.collection, {})[doc.id] = doc
            self._seq = replay_from
        if not self._log_path.exists():
            return
        good_end = 0
        with open(self._log_path, "rb") as fh:
            for doc, end in iter_log_records(fh):
                good_end = end
                self._feed.append(
                    ChangeEvent(doc.seq, doc.collection, doc.id, doc.version, doc.deleted, doc.body)
                )
                if doc.seq > replay_from:
                    self._docs.setdefault(doc.collection, {})[doc.id] = doc
                    self._seq = max(self._seq, doc.seq)
        while len(self._feed) > self._retention:
            self._feed.popleft()
        actual = self._log_path.stat().st_size
        if good_end < actual:
            with open(self._log_path, "r+b") as fh:
                fh.truncate(good_end)

    # -- write path ------------------------------------------------------------

    def _commit(self, collection: str, id: str, body: dict, deleted: bool,
                expected_version: int | None) -> Document:
        with self._lock:
            current = self._docs.get(collection, {}).get(id)
            current_version = current.version if current else 0
            if expected_version is not None and expected_version != current_version:
                raise VersionConflict(current_version)
            doc = Document(
                collection=collection,
                id=id,
                version=current_version + 1,
                seq=self._seq + 1,
                body=body,
                updated_at=_now_iso(),
                deleted=deleted,
            )
            self._log_fh.write(encode_log_record(doc))
            self._log_fh.flush()
            if self._fsync:
                os.fsync(self._log_fh.fileno())
            self._seq = doc.seq
            self._docs.setdefault(collection, {})[id] = doc
            event = ChangeEvent(doc.seq, collection, id, doc.version, deleted, body)
            self._feed.append(event)
            if len(self._feed) > self._retention:
                self._feed.popleft()
            for sub in list(self._subs):
                sub._offer(event)
            self._commits_since_snapshot += 1
            if self._commits_since_snapshot >= self._snapshot_every:
                self._write_snapshot()
            return doc

    def upsert(self, collection: str, id: str, body: dict,
               expected_version: int | None = None) -> Document:
        if not _COLLECTION_RE.match(collection):
            raise ValueError(f"bad collection name {collection!r}")
        if not isinstance(body, dict):
            raise TypeError("body must be a JSON object")
        return self._commit(collection, id, body, deleted=False,
                            expected_version=expected_version)

    def delete(self, collection: str, id: str) -> Document:
        with self._lock:
            current = self._docs.get(collection, {}).get(id)
            if current is None or current.deleted:
                raise NotFound(collection, id)
            return self._commit(collection, id, {}, deleted=True, expected_version=None)

    # -- read path -------------------------------------------------------------

    def get(self, collection: str, id: str) -> Document:
        with self._lock:
            doc = self._docs.get(collection, {}).get(id)
            if doc is None or doc.deleted:
                raise NotFound(collection, id)
            return doc

    def query(self, collection: str, filter: dict | None = None,
              limit: int | None = None, offset: int = 0) -> list[Document]:
        with self._lock:
            docs = [d for d in self._docs.get(collection, {}).values() if not d.deleted]
        if filter:
            docs = [d for d in docs if all(d.body.get(k) == v for k, v in filter.items())]
        docs.sort(key=lambda d: d.id)
        if offset:
            docs = docs[offset:]
        if limit is not None:
            docs = docs[:limit]
        return docs

    def count(self, collection: str, filter: dict | None = None) -> int:
        with self._lock:
            docs = [d for d in self._docs.get(collection, {}).values() if not d.deleted]
        if filter:
            docs = [d for d in docs if all(d.body.get(k) == v for k, v in filter.items())]
        return len(docs)

    def collections(self) -> list[str]:
        with self._lock:
            return sorted(self._docs)

    @property
    def last_seq(self) -> int:
        with self._lock:
            return self._seq

    def first_retained_seq(self) -> int:
        with self._lock:
            return self._feed[0].seq if self._feed else self._seq + 1

    # -- change feed -------------------------------------------------------------

    def changes_since(self, seq: int, collections: Iterable[str] | None = None,
                      *, buffer: int = 10_000) -> Subscription:
        """Every committed change with seq' > seq, in order, then live.

        Raises SeqTooOld when the requested cursor precedes the retained
        horizon; the caller must re-bootstrap via query().
        """
        if seq < 0:
            raise ValueError("seq must be >= 0")
        wanted = frozenset(collections) if collections is not None else None
        with self._lock:
            if seq < self._seq:
                first_retained = self._feed[0].seq if self._feed else self._seq + 1
                if seq + 1 < first_retained:
                    raise SeqTooOld(first_retained)
            backlog = [
                e for e in self._feed
                if e.seq > seq and (wanted is None or e.collection in wanted)
            ]
            sub = Subscription(self, backlog, wanted, maxsize=buffer)
            self._subs.append(sub)
            return sub

    def _unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            try:
                self._subs.remove(sub)
            except ValueError:
                pass

    # -- maintenance -------------------------------------------------------------

    def _write_snapshot(self) -> None:
        tmp = self._snapshot_path.with_suffix(".tmp")
        with self._lock:
            state = {
                "seq": self._seq,
                "documents": [
                    {
                        "collection": d.collection,
                        "id": d.id,
                        "version": d.version,
                        "seq": d.seq,
                        "body": d.body,
                        "updated_at": d.updated_at,
                        "deleted": d.deleted,
                    }
                    for coll in self._docs.values()
                    for d in coll.values()
                ],
            }
            self._commits_since_snapshot = 0
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(state, fh)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self._snapshot_path)

    def snapshot(self) -> None:
        self._write_snapshot()

    def close(self) -> None:
        with self._lock:
            for sub in list(self._subs):
                sub._closed = True
            self._subs.clear()
            self._log_fh.close()
