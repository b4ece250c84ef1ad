"""Fault-code contract shared by the XML-RPC clients and simulators.

Numeric codes are this project's wire contract: 1xx faults are
transient and safe to retry, 2xx faults are terminal protocol answers.
Transport and timeout failures are always retriable; a response that
cannot be parsed is treated as terminal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

FAULT_TRANSIENT_INTERNAL = 100
FAULT_BUSY = 101
FAULT_DUPLICATE = 201
FAULT_NOT_FOUND = 202
FAULT_BAD_CREDENTIAL = 203
FAULT_LEASE_CONFLICT = 204
FAULT_BAD_REQUEST = 205

FAULT_CODE_TABLE = {
    FAULT_TRANSIENT_INTERNAL: "transient internal error",
    FAULT_BUSY: "busy, retry later",
    FAULT_DUPLICATE: "record already exists",
    FAULT_NOT_FOUND: "no such record",
    FAULT_BAD_CREDENTIAL: "credential rejected",
    FAULT_LEASE_CONFLICT: "lease conflicts with an accepted reservation",
    FAULT_BAD_REQUEST: "malformed request payload",
}


class FaultKind(str, enum.Enum):
    transport = "transport"
    timeout = "timeout"
    fault = "fault"
    parse = "parse"


@dataclass(frozen=True)
class AmFault:
    kind: FaultKind
    retriable: bool
    detail: str
    code: int | None = None


class SfaError(Exception):
    """Base error for all client-call failures; always carries an AmFault."""

    def __init__(self, fault: AmFault):
        super().__init__(fault.detail)
        self.fault = fault

    @property
    def retriable(self) -> bool:
        return self.fault.retriable


class AmFaultError(SfaError):
    """Transport, timeout, parse, or unmapped fault-code failure."""


class DuplicateHrn(SfaError):
    pass


class RecordNotFound(SfaError):
    pass


class CredentialRejected(SfaError):
    pass


class LeaseConflict(SfaError):
    pass


_TERMINAL_ERRORS = {
    FAULT_DUPLICATE: DuplicateHrn,
    FAULT_NOT_FOUND: RecordNotFound,
    FAULT_BAD_CREDENTIAL: CredentialRejected,
    FAULT_LEASE_CONFLICT: LeaseConflict,
}


def fault_to_error(code: int, detail: str) -> SfaError:
    """Total mapping from a wire fault code to a typed client error."""
    retriable = 100 <= code < 200
    fault = AmFault(FaultKind.fault, retriable, detail, code=code)
    cls = _TERMINAL_ERRORS.get(code, AmFaultError)
    return cls(fault)


def transport_error(detail: str) -> AmFaultError:
    return AmFaultError(AmFault(FaultKind.transport, True, detail))


def timeout_error(detail: str) -> AmFaultError:
    return AmFaultError(AmFault(FaultKind.timeout, True, detail))


def parse_error(detail: str) -> AmFaultError:
    return AmFaultError(AmFault(FaultKind.parse, False, detail))
