"""XML-RPC clients for the SFA registry and aggregate managers.

Clients are stateless apart from their endpoint configuration; any
number of calls may be in flight concurrently. Every call either
returns a typed value or raises a typed SfaError within the configured
timeout; nothing hangs and nothing leaks xmlrpc internals to callers.
"""

from __future__ import annotations

import http.client
import threading
import xml.parsers.expat
import xmlrpc.client
from dataclasses import dataclass

from ..model import (
    Credential,
    RSpec,
    Record,
    credential_to_base64,
    decode_rspec,
    encode_rspec,
)
from ..model.rspec import RspecParseError
from . import faults
from .wire import record_to_struct, struct_to_record

DEFAULT_TIMEOUT_MS = 90_000


@dataclass(frozen=True)
class EndpointConfig:
    """One registry or aggregate-manager endpoint."""

    name: str
    url: str
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    root_key: bytes | None = None

    def __post_init__(self) -> None:
        if self.timeout_ms < 1000:
            raise ValueError("timeout_ms must be at least 1000")


class _TimeoutTransport(xmlrpc.client.Transport):
    def __init__(self, timeout: float):
        super().__init__()
        self._timeout = timeout

    def make_connection(self, host):
        conn = super().make_connection(host)
        conn.timeout = self._timeout
        return conn


class _BaseClient:
    """Shared invoke path with uniform error mapping and a call counter
    (the counter backs the cache-only-reads assertion in tests)."""

    def __init__(self, config: EndpointConfig):
        self.config = config
        self._counter_lock = threading.Lock()
        self.calls = 0

    def _invoke(self, method: str, *params):
        with self._counter_lock:
            self.calls += 1
        timeout = self.config.timeout_ms / 1000.0
        proxy = xmlrpc.client.ServerProxy(
            self.config.url, transport=_TimeoutTransport(timeout)
        )
        try:
            return getattr(proxy, method)(*params)
        except xmlrpc.client.Fault as fault:
            raise faults.fault_to_error(fault.faultCode, fault.faultString) from None
        except TimeoutError as exc:
            raise faults.timeout_error(f"{method} on {self.config.name}: {exc}") from None
        except (xml.parsers.expat.ExpatError, xmlrpc.client.ResponseError) as exc:
            raise faults.parse_error(f"{method} on {self.config.name}: {exc}") from None
        except (OSError, http.client.HTTPException) as exc:
            raise faults.transport_error(f"{method} on {self.config.name}: {exc}") from None

    @staticmethod
    def _cred(credential: Credential | str) -> str:
        if isinstance(credential, Credential):
            return credential_to_base64(credential)
        return credential


class RegistryClient(_BaseClient):
    def register(self, record: Record, credential: Credential | str) -> Record:
        result = self._invoke("Register", record_to_struct(record), self._cred(credential))
        return self._record(result)

    def resolve(self, hrn: str, credential: Credential | str) -> Record:
        return self._record(self._invoke("Resolve", hrn, self._cred(credential)))

    def list(self, hrn: str, credential: Credential | str) -> list[Record]:
        result = self._invoke("List", hrn, self._cred(credential))
        if not isinstance(result, list):
            raise faults.parse_error(f"List returned {type(result).__name__}")
        return [self._record(item) for item in result]

    def remove(self, hrn: str, record_type: str, credential: Credential | str) -> bool:
        return bool(self._invoke("Remove", hrn, record_type, self._cred(credential)))

    @staticmethod
    def _record(raw) -> Record:
        try:
            return struct_to_record(raw)
        except (KeyError, TypeError, ValueError) as exc:
            raise faults.parse_error(f"bad record struct: {exc}") from None


class AmClient(_BaseClient):
    def get_version(self) -> dict:
        result = self._invoke("GetVersion")
        if not isinstance(result, dict) or "api_version" not in result:
            raise faults.parse_error(f"bad GetVersion response: {result!r}")
        return result

    def list_resources(self, credential: Credential | str) -> RSpec:
        result = self._invoke("ListResources", self._cred(credential), {})
        return self._rspec(result)

    def allocate(self, slice_urn: str, credential: Credential | str,
                 request: RSpec) -> RSpec:
        result = self._invoke(
            "Allocate", slice_urn, self._cred(credential),
            encode_rspec(request).decode("utf-8"), {},
        )
        return self._rspec(result)

    def delete(self, urns: list[str], credential: Credential | str) -> bool:
        return bool(self._invoke("Delete", list(urns), self._cred(credential), {}))

    def status(self, slice_urn: str, credential: Credential | str) -> list[dict]:
        result = self._invoke("Status", slice_urn, self._cred(credential), {})
        if not isinstance(result, list):
            raise faults.parse_error(f"Status returned {type(result).__name__}")
        return result

    @staticmethod
    def _rspec(raw) -> RSpec:
        if not isinstance(raw, str):
            raise faults.parse_error(f"rspec payload is {type(raw).__name__}")
        try:
            return decode_rspec(raw.encode("utf-8"))
        except RspecParseError as exc:
            raise faults.parse_error(str(exc)) from None
