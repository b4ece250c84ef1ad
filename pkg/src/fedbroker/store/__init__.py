"""Embedded document database backing the federation cache."""

from .store import (
    ChangeEvent,
    Document,
    DocumentStore,
    NotFound,
    SeqTooOld,
    Subscription,
    SubscriptionClosed,
    VersionConflict,
    encode_log_record,
    iter_log_records,
)

__all__ = [
    "ChangeEvent",
    "Document",
    "DocumentStore",
    "NotFound",
    "SeqTooOld",
    "Subscription",
    "SubscriptionClosed",
    "VersionConflict",
    "encode_log_record",
    "iter_log_records",
]
