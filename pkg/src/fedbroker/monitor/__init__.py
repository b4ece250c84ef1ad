"""Lifecycle monitoring probe."""

from .probe import (
    DEFAULT_PERIOD_SECONDS,
    Probe,
    ProbeConfig,
    ProbeReport,
    ScheduledRunner,
    StepResult,
    TransportFailure,
    run_probe,
)

__all__ = [
    "DEFAULT_PERIOD_SECONDS",
    "Probe",
    "ProbeConfig",
    "ProbeReport",
    "ScheduledRunner",
    "StepResult",
    "TransportFailure",
    "run_probe",
]
