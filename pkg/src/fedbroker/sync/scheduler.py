"""Periodic sync driver.

Ticks are anchored (next = last tick + period) with an immediate first
tick at startup so the cache is warm before reads are served. A tick
for a (target, testbed) pair is skipped while any earlier sync event of
that pair is still pending or running: refreshes never pile up behind a
slow backend.
"""

from __future__ import annotations

import enum
import threading
import time
from dataclasses import dataclass
from typing import Callable

from ..engine.events import EVENTS_COLLECTION, EventType
from ..store import DocumentStore

MIN_PERIOD_SECONDS = 10

DEFAULT_PERIODS = {"authorities": 86400, "resources": 3600, "leases": 300}


class SyncTarget(str, enum.Enum):
    authorities = "authorities"
    resources = "resources"
    leases = "leases"

    @property
    def event_type(self) -> EventType:
        return EventType(f"sync.{self.value}")


@dataclass(frozen=True)
class SyncSchedule:
    target: SyncTarget
    period_seconds: int
    per_testbed: bool

    def __post_init__(self) -> None:
        if self.period_seconds < MIN_PERIOD_SECONDS:
            raise ValueError(f"period_seconds must be >= {MIN_PERIOD_SECONDS}")


def default_schedules(periods: dict[str, int] | None = None) -> list[SyncSchedule]:
    merged = dict(DEFAULT_PERIODS, **(periods or {}))
    return [
        SyncSchedule(SyncTarget.authorities, merged["authorities"], per_testbed=False),
        SyncSchedule(SyncTarget.resources, merged["resources"], per_testbed=True),
        SyncSchedule(SyncTarget.leases, merged["leases"], per_testbed=True),
    ]


class SyncScheduler:
    def __init__(
        self,
        schedules: list[SyncSchedule],
        submit: Callable[..., object],
        store: DocumentStore,
        testbeds: list[str],
        *,
        actor: str = "onelab.portal",
        time_fn: Callable[[], float] = time.monotonic,
    ):
        if not schedules:
            raise ValueError("schedules must be nonempty")
        self._schedules = list(schedules)
        self._submit = submit
        self._store = store
        self._testbeds = list(testbeds)
        self._actor = actor
        self._time = time_fn
        self._next_tick: dict[SyncTarget, float] = {}
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()

    # -- core ------------------------------------------------------------------

    def run_pending(self, now: float | None = None) -> list[object]:
        """Submit every due sync event; returns the submitted events.
        Deterministic and callable with a simulated clock."""
        now = self._time() if now is None else now
        submitted = []
        for schedule in self._schedules:
            next_tick = self._next_tick.get(schedule.target)
            if next_tick is None:
                next_tick = now  # immediate first tick
            if now < next_tick:
                continue
            # Anchored cadence: late ticks do not drift the schedule.
            while next_tick <= now:
                next_tick += schedule.period_seconds
            self._next_tick[schedule.target] = next_tick
            scopes = self._testbeds if schedule.per_testbed else [None]
            for testbed in scopes:
                if self._sync_in_flight(schedule.target, testbed):
                    continue
                payload = {} if testbed is None else {"testbed": testbed}
                try:
                    submitted.append(
                        self._submit(schedule.target.event_type, payload, self._actor)
                    )
                except Exception:  # submission failures: log-and-continue policy
                    continue
        return submitted

    def _sync_in_flight(self, target: SyncTarget, testbed: str | None) -> bool:
        event_type = target.event_type.value
        for status in ("pending", "running"):
            for doc in self._store.query(EVENTS_COLLECTION, {"status": status, "queue": "sync"}):
                if doc.body.get("type") != event_type:
                    continue
                if testbed is None or doc.body.get("payload", {}).get("testbed") == testbed:
                    return True
        return False

    # -- background driver -------------------------------------------------------

    def start(self, poll_interval: float = 0.5) -> "SyncScheduler":
        self._stop.clear()
        self._thread = threading.Thread(target=self._loop, args=(poll_interval,),
                                        name="sync-scheduler", daemon=True)
        self._thread.start()
        return self

    def _loop(self, poll_interval: float) -> None:
        while not self._stop.is_set():
            self.run_pending()
            self._stop.wait(poll_interval)

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
