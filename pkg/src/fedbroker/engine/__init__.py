"""Event router, queues, and worker pools."""

from .engine import EventEngine, HandlerError, TransitionLog
from .events import (
    DEFAULT_QUEUES,
    EVENTS_COLLECTION,
    Event,
    EventStatus,
    EventType,
    PayloadInvalid,
    QueueName,
    QueueSpec,
    ROUTING,
    route,
    submit_event,
    validate_payload,
)
from .handlers import HandlerContext, build_handlers, OPERATOR_HRN

__all__ = [name for name in dir() if not name.startswith("_")]
