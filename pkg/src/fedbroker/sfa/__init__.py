"""XML-RPC client library for registry and aggregate managers."""

from .client import AmClient, EndpointConfig, RegistryClient, DEFAULT_TIMEOUT_MS
from .faults import (
    AmFault,
    AmFaultError,
    CredentialRejected,
    DuplicateHrn,
    FaultKind,
    LeaseConflict,
    RecordNotFound,
    SfaError,
    FAULT_BAD_CREDENTIAL,
    FAULT_BUSY,
    FAULT_CODE_TABLE,
    FAULT_DUPLICATE,
    FAULT_LEASE_CONFLICT,
    FAULT_NOT_FOUND,
    FAULT_TRANSIENT_INTERNAL,
    fault_to_error,
)
from .wire import record_to_struct, struct_to_record

__all__ = [name for name in dir() if not name.startswith("_")]
