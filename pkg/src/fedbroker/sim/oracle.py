"""Brute-force occupancy oracle for reservation decisions.

Marks every minute a lease touches on every component it names, and
calls a request conflicting iff any (component, minute) cell is already
marked. On minute-aligned leases this agrees exactly with half-open
interval intersection; workloads checked against the oracle therefore
use minute-aligned times.
"""

from __future__ import annotations

from datetime import datetime
from math import ceil, floor


def occupied_minutes(start: datetime, end: datetime) -> range:
    """Epoch-minute indexes whose minute window intersects [start, end)."""
    first = floor(start.timestamp() / 60)
    last = ceil(end.timestamp() / 60)
    return range(first, last)


class OccupancyGrid:
    def __init__(self) -> None:
        self._busy: dict[str, set[int]] = {}

    def conflicts(self, components, start: datetime, end: datetime) -> bool:
        minutes = occupied_minutes(start, end)
        for cid in components:
            busy = self._busy.get(cid)
            if busy and any(m in busy for m in minutes):
                return True
        return False

    def add(self, components, start: datetime, end: datetime) -> None:
        minutes = set(occupied_minutes(start, end))
        for cid in components:
            self._busy.setdefault(cid, set()).update(minutes)

    def remove(self, components, start: datetime, end: datetime) -> None:
        minutes = set(occupied_minutes(start, end))
        for cid in components:
            busy = self._busy.get(cid)
            if busy:
                busy.difference_update(minutes)

    @classmethod
    def from_leases(cls, leases) -> "OccupancyGrid":
        """Grid over (components, start_time, end_time) triples."""
        grid = cls()
        for lease in leases:
            grid.add(lease.components, lease.start_time, lease.end_time)
        return grid
