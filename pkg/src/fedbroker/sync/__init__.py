"""Periodic cache synchronization from registry and aggregate managers."""

from .handlers import (
    SYNC_STATUS_COLLECTION,
    build_sync_handlers,
    handle_sync_authorities,
    handle_sync_leases,
    handle_sync_resources,
)
from .scheduler import (
    DEFAULT_PERIODS,
    MIN_PERIOD_SECONDS,
    SyncSchedule,
    SyncScheduler,
    SyncTarget,
    default_schedules,
)

__all__ = [name for name in dir() if not name.startswith("_")]
