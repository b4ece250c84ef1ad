"""Router and worker pools processing persisted events.

One pool per queue; workers claim pending events in submission order
through a compare-and-set on the event document, so no event ever runs
on two workers at once while delivery stays at-least-once. Retriable
failures are re-queued with exponential backoff until the queue's
attempt budget is spent; events found in ``running`` state at startup
(a crash signature) are returned to ``pending``.

Every state transition is appended to a structured NDJSON log:
``{"ts", "event_id", "type", "transition", "attempts", "error"?}``.
"""

from __future__ import annotations

import heapq
import json
import threading
import time
from datetime import datetime, timedelta, timezone
from typing import Callable

from ..store import DocumentStore, NotFound, VersionConflict
from .events import (
    EVENTS_COLLECTION,
    DEFAULT_QUEUES,
    Event,
    EventStatus,
    EventType,
    QueueName,
    QueueSpec,
    now_iso,
    route,
    submit_event,
)

__all__ = ["EventEngine", "HandlerError", "TransitionLog"]

Handler = Callable[[Event], dict | None]


class HandlerError(Exception):
    """Typed handler failure; ``retriable`` drives the retry policy."""

    def __init__(self, code: str, message: str, *, retriable: bool):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.retriable = retriable


class TransitionLog:
    def __init__(self, path=None):
        self._lock = threading.Lock()
        self._fh = open(path, "a", encoding="utf-8") if path else None

    def write(self, event: Event, transition: str, error: dict | None = None) -> None:
        if self._fh is None:
            return
        record = {
            "ts": now_iso(),
            "event_id": event.event_id,
            "type": event.type.value,
            "transition": transition,
            "attempts": event.attempts,
        }
        if error:
            record["error"] = error
        with self._lock:
            self._fh.write(json.dumps(record, separators=(",", ":")) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh:
            self._fh.close()


class _Queue:
    """Ready-time ordered work queue for one pool."""

    def __init__(self):
        self._cond = threading.Condition()
        self._heap: list[tuple[float, int, str]] = []
        self._counter = 0
        self._open = True

    def push(self, event_id: str, ready_at: float) -> None:
        with self._cond:
            self._counter += 1
            heapq.heappush(self._heap, (ready_at, self._counter, event_id))
            self._cond.notify()

    def pop_ready(self, timeout: float) -> str | None:
        deadline = time.monotonic() + timeout
        with self._cond:
            while True:
                now = time.monotonic()
                if not self._open:
                    return None
                if self._heap and self._heap[0][0] <= now:
                    return heapq.heappop(self._heap)[2]
                wait = min(self._heap[0][0] - now, deadline - now) if self._heap else deadline - now
                if wait <= 0:
                    return None
                self._cond.wait(wait)

    def close(self) -> None:
        with self._cond:
            self._open = False
            self._cond.notify_all()


class EventEngine:
    def __init__(
        self,
        store: DocumentStore,
        handlers: dict[EventType, Handler],
        queues: dict[QueueName, QueueSpec] | None = None,
        *,
        log_path=None,
        poll_interval: float = 0.2,
    ):
        self.store = store
        self.handlers = dict(handlers)
        self.queues = dict(queues or DEFAULT_QUEUES)
        self.log = TransitionLog(log_path)
        self._poll_interval = poll_interval
        self._work: dict[QueueName, _Queue] = {}
        self._threads: list[threading.Thread] = []
        self._running = False

    # -- lifecycle ---------------------------------------------------------------

    def start(self) -> "EventEngine":
        missing = [
            et.value
            for et, queue in _routed_types(self.queues)
            if et not in self.handlers
        ]
        if missing:
            raise RuntimeError(f"no handler registered for: {', '.join(sorted(missing))}")
        self._running = True
        self._work = {name: _Queue() for name in self.queues}
        self._recover()
        for name, spec in self.queues.items():
            for k in range(spec.workers):
                thread = threading.Thread(
                    target=self._worker_loop, args=(spec,),
                    name=f"worker-{name.value}-{k}", daemon=True,
                )
                thread.start()
                self._threads.append(thread)
        return self

    def stop(self) -> None:
        self._running = False
        for queue in self._work.values():
            queue.close()
        for thread in self._threads:
            thread.join(timeout=5)
        self._threads.clear()
        self.log.close()

    def _recover(self) -> None:
        """Re-queue unfinished events: crashed ``running`` events return to
        pending (at-least-once), pending events are simply re-enqueued."""
        docs = self.store.query(EVENTS_COLLECTION)
        events = sorted(
            (Event.from_document(d) for d in docs), key=lambda e: (e.created_at, e.event_id)
        )
        for event in events:
            if event.status is EventStatus.running:
                body = dict(event.body(), status=EventStatus.pending.value)
                try:
                    doc = self.store.upsert(
                        EVENTS_COLLECTION, event.event_id, body,
                        expected_version=event.version,
                    )
                except VersionConflict:  # pragma: no cover - concurrent recovery
                    continue
                event = Event.from_document(doc)
                self.log.write(event, "recovered")
            if event.status is EventStatus.pending and event.queue in self._work:
                self._work[event.queue].push(event.event_id, _ready_time(event))

    # -- submission ---------------------------------------------------------------

    def submit(self, event_type: EventType | str, payload: dict, actor: str) -> Event:
        """Persist a new event (durable before return) and hand it to its queue."""
        event = submit_event(self.store, event_type, payload, actor)
        self.log.write(event, "submitted")
        if self._running and event.queue in self._work:
            self._work[event.queue].push(event.event_id, time.monotonic())
        return event

    # -- execution ---------------------------------------------------------------

    def _worker_loop(self, spec: QueueSpec) -> None:
        queue = self._work[spec.name]
        while self._running:
            event_id = queue.pop_ready(self._poll_interval)
            if event_id is None:
                continue
            try:
                self._execute(spec, event_id)
            except Exception:  # pragma: no cover - worker must survive anything
                pass

    def _execute(self, spec: QueueSpec, event_id: str) -> None:
        try:
            doc = self.store.get(EVENTS_COLLECTION, event_id)
        except NotFound:
            return
        event = Event.from_document(doc)
        if event.status is not EventStatus.pending:
            return
        claim = dict(
            event.body(),
            status=EventStatus.running.value,
            attempts=event.attempts + 1,
            started_at=now_iso(),
            not_before=None,
        )
        try:
            doc = self.store.upsert(
                EVENTS_COLLECTION, event_id, claim, expected_version=event.version
            )
        except VersionConflict:
            return  # another worker claimed it first
        event = Event.from_document(doc)
        self.log.write(event, "running")
        handler = self.handlers[event.type]
        try:
            result = handler(event)
        except HandlerError as exc:
            self._finish_error(spec, event, exc)
        except Exception as exc:  # defensive: unexpected bug in a handler
            self._finish_error(
                spec, event, HandlerError("internal", repr(exc), retriable=False)
            )
        else:
            body = dict(
                event.body(),
                status=EventStatus.success.value,
                finished_at=now_iso(),
                result=result or {},
            )
            final = self.store.upsert(
                EVENTS_COLLECTION, event.event_id, body, expected_version=event.version
            )
            self.log.write(Event.from_document(final), "success")

    def _finish_error(self, spec: QueueSpec, event: Event, exc: HandlerError) -> None:
        error = {"code": exc.code, "message": exc.message, "retriable": exc.retriable}
        if exc.retriable and event.attempts < spec.max_attempts:
            delay = (spec.backoff_base_ms / 1000.0) * (2 ** (event.attempts - 1))
            ready = datetime.now(timezone.utc) + timedelta(seconds=delay)
            body = dict(
                event.body(),
                status=EventStatus.pending.value,
                error=error,
                not_before=ready.strftime("%Y-%m-%dT%H:%M:%S.%fZ"),
            )
            doc = self.store.upsert(
                EVENTS_COLLECTION, event.event_id, body, expected_version=event.version
            )
            self.log.write(Event.from_document(doc), "retry", error=error)
            self._work[spec.name].push(event.event_id, time.monotonic() + delay)
        else:
            body = dict(
                event.body(),
                status=EventStatus.error.value,
                error=error,
                finished_at=now_iso(),
            )
            doc = self.store.upsert(
                EVENTS_COLLECTION, event.event_id, body, expected_version=event.version
            )
            self.log.write(Event.from_document(doc), "error", error=error)

    # -- observation ---------------------------------------------------------------

    def get_event(self, event_id: str) -> Event:
        return Event.from_document(self.store.get(EVENTS_COLLECTION, event_id))

    def wait_for(self, event_id: str, timeout: float = 30.0, poll: float = 0.02) -> Event:
        """Block until the event reaches a terminal state."""
        deadline = time.monotonic() + timeout
        while True:
            event = self.get_event(event_id)
            if event.terminal:
                return event
            if time.monotonic() >= deadline:
                raise TimeoutError(f"event {event_id} still {event.status.value}")
            time.sleep(poll)

    def queue_depths(self) -> dict[str, dict[str, int]]:
        depths = {
            name.value: {"pending": 0, "running": 0} for name in self.queues
        }
        for doc in self.store.query(EVENTS_COLLECTION):
            status = doc.body.get("status")
            queue = doc.body.get("queue")
            if status in ("pending", "running") and queue in depths:
                depths[queue][status] += 1
        return depths


def _routed_types(queues: dict[QueueName, QueueSpec]):
    for event_type in EventType:
        queue = route(event_type)
        if queue in queues:
            yield event_type, queue


def _ready_time(event: Event) -> float:
    if not event.not_before:
        return time.monotonic()
    # not_before is wall-clock ISO; convert the residual delay to monotonic.
    try:
        target = datetime.strptime(event.not_before, "%Y-%m-%dT%H:%M:%S.%fZ").replace(
            tzinfo=timezone.utc
        )
    except ValueError:
        return time.monotonic()
    delay = (target - datetime.now(timezone.utc)).total_seconds()
    return time.monotonic() + max(0.0, delay)
