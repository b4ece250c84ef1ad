"""XML-RPC servers fronting the simulated federation state.

Each server applies its configured latency before handling, answers
faults during scripted failure windows (or when toggled at runtime for
tests), and can corrupt its responses to exercise client parse paths.
Servers handle requests concurrently; they can be stopped and restarted
on the same port to model backend outages.
"""

from __future__ import annotations

import random
import threading
import time
import xmlrpc.client
from socketserver import ThreadingMixIn
from xmlrpc.server import SimpleXMLRPCServer

from ..model.rspec import RspecParseError, decode_rspec, encode_rspec
from ..sfa.client import EndpointConfig
from ..sfa.faults import FAULT_BAD_REQUEST
from ..sfa.wire import record_to_struct, struct_to_record
from .config import FederationFixture, LatencySpec
from .state import AmSim, RegistrySim, SimFault, SimFederation

__all__ = ["RegistryServer", "AmServer", "FederationServers", "BindError"]


class BindError(OSError):
    pass


class _SimRpcServer(ThreadingMixIn, SimpleXMLRPCServer):
    allow_reuse_address = True
    daemon_threads = True
    corrupt = False

    def _marshaled_dispatch(self, data, dispatch_method=None, path=None):
        if self.corrupt:
            return b"this is not xml-rpc"
        return super()._marshaled_dispatch(data, dispatch_method, path)


class _SimServer:
    """Lifecycle, latency, and failure plumbing shared by both server kinds."""

    def __init__(self, name: str, host: str, port: int, seed: int):
        self._name = name
        self._host = host
        self._requested_port = port
        self._rng = random.Random(f"{seed}:server:{name}")
        self._rng_lock = threading.Lock()
        self._fault_code: int | None = None
        self._failure_script = ()
        self._started_at = time.monotonic()
        self._server: _SimRpcServer | None = None
        self._thread: threading.Thread | None = None
        self.port: int | None = None

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        if self._server is not None:
            return
        port = self.port if self.port is not None else self._requested_port
        try:
            server = _SimRpcServer((self._host, port), logRequests=False)
        except OSError as exc:
            raise BindError(f"{self._name}: cannot bind {self._host}:{port}: {exc}") from exc
        self.port = server.server_address[1]
        self._register(server)
        self._server = server
        self._started_at = time.monotonic()
        self._thread = threading.Thread(
            target=server.serve_forever, kwargs={"poll_interval": 0.05},
            name=f"sim-{self._name}", daemon=True,
        )
        self._thread.start()

    def stop(self) -> None:
        if self._server is None:
            return
        self._server.shutdown()
        self._server.server_close()
        self._server = None
        self._thread = None

    @property
    def url(self) -> str:
        return f"http://{self._host}:{self.port}"

    # -- failure injection -----------------------------------------------------

    def set_fault(self, code: int | None) -> None:
        self._fault_code = code

    def set_corrupt(self, corrupt: bool) -> None:
        if self._server is not None:
            self._server.corrupt = corrupt

    def _guard(self, latency: LatencySpec) -> None:
        fault = self._fault_code
        if fault is None:
            elapsed = time.monotonic() - self._started_at
            for window in self._failure_script:
                if window.start <= elapsed < window.end:
                    fault = window.fault_code
                    break
        if fault == "corrupt":
            self.set_corrupt(True)
            fault = None
        if fault is not None:
            raise xmlrpc.client.Fault(int(fault), f"{self._name}: scripted fault")
        with self._rng_lock:
            delay = latency.sample(self._rng)
        if delay > 0:
            time.sleep(delay)

    def _register(self, server: _SimRpcServer) -> None:  # pragma: no cover
        raise NotImplementedError

    @staticmethod
    def _call(fn, *args):
        try:
            return fn(*args)
        except SimFault as fault:
            raise xmlrpc.client.Fault(fault.code, fault.message) from None


class RegistryServer(_SimServer):
    def __init__(self, state: RegistrySim, latency: LatencySpec, *,
                 host: str = "127.0.0.1", port: int = 0, seed: int = 0):
        super().__init__("registry", host, port, seed)
        self._state = state
        self._latency = latency

    def _register(self, server: _SimRpcServer) -> None:
        server.register_function(self._rpc_register, "Register")
        server.register_function(self._rpc_resolve, "Resolve")
        server.register_function(self._rpc_list, "List")
        server.register_function(self._rpc_remove, "Remove")

    def _rpc_register(self, record: dict, credential: str) -> dict:
        self._guard(self._latency)
        try:
            parsed = struct_to_record(record)
        except (KeyError, TypeError, ValueError) as exc:
            raise xmlrpc.client.Fault(FAULT_BAD_REQUEST, f"bad record: {exc}") from None
        return record_to_struct(self._call(self._state.register, parsed, credential))

    def _rpc_resolve(self, hrn: str, credential: str) -> dict:
        self._guard(self._latency)
        return record_to_struct(self._call(self._state.resolve, hrn, credential))

    def _rpc_list(self, hrn: str, credential: str) -> list[dict]:
        self._guard(self._latency)
        return [record_to_struct(r) for r in self._call(self._state.list_children, hrn, credential)]

    def _rpc_remove(self, hrn: str, record_type: str, credential: str) -> bool:
        self._guard(self._latency)
        return self._call(self._state.remove, hrn, record_type, credential)


class AmServer(_SimServer):
    def __init__(self, state: AmSim, *, host: str = "127.0.0.1", port: int = 0, seed: int = 0):
        super().__init__(state.name, host, port, seed)
        self._state = state
        self._failure_script = state.config.failure_script

    def _register(self, server: _SimRpcServer) -> None:
        server.register_function(self._rpc_get_version, "GetVersion")
        server.register_function(self._rpc_list_resources, "ListResources")
        server.register_function(self._rpc_allocate, "Allocate")
        server.register_function(self._rpc_delete, "Delete")
        server.register_function(self._rpc_status, "Status")

    def _rpc_get_version(self) -> dict:
        self._guard(self._state.config.other_latency)
        return self._state.get_version()

    def _rpc_list_resources(self, credential: str, options: dict) -> str:
        self._guard(self._state.config.list_resources_latency)
        rspec = self._call(self._state.list_resources, credential)
        return encode_rspec(rspec).decode("utf-8")

    def _rpc_allocate(self, slice_urn: str, credential: str, rspec: str, options: dict) -> str:
        self._guard(self._state.config.allocate_latency)
        try:
            request = decode_rspec(rspec.encode("utf-8"))
        except RspecParseError as exc:
            raise xmlrpc.client.Fault(FAULT_BAD_REQUEST, str(exc)) from None
        manifest = self._call(self._state.allocate, slice_urn, credential, request)
        return encode_rspec(manifest).decode("utf-8")

    def _rpc_delete(self, urns: list, credential: str, options: dict) -> bool:
        self._guard(self._state.config.other_latency)
        return self._call(self._state.delete, list(urns), credential)

    def _rpc_status(self, slice_urn: str, credential: str, options: dict) -> list[dict]:
        self._guard(self._state.config.other_latency)
        return self._call(self._state.status, slice_urn, credential)


class FederationServers:
    """Registry server plus one AM server per testbed, as a unit."""

    def __init__(self, federation: SimFederation, *, host: str = "127.0.0.1"):
        fixture: FederationFixture = federation.fixture
        self.federation = federation
        self.registry = RegistryServer(
            federation.registry, fixture.registry.latency, host=host, seed=fixture.seed
        )
        self.ams: dict[str, AmServer] = {
            name: AmServer(am, host=host, seed=fixture.seed)
            for name, am in federation.ams.items()
        }

    def start(self) -> "FederationServers":
        self.registry.start()
        for server in self.ams.values():
            server.start()
        return self

    def stop(self) -> None:
        self.registry.stop()
        for server in self.ams.values():
            server.stop()

    def registry_endpoint(self, timeout_ms: int = 90_000) -> EndpointConfig:
        return EndpointConfig(
            name="registry", url=self.registry.url, timeout_ms=timeout_ms,
            root_key=self.federation.root_public_key,
        )

    def am_endpoints(self, timeout_ms: int = 90_000) -> dict[str, EndpointConfig]:
        return {
            name: EndpointConfig(
                name=name, url=server.url, timeout_ms=timeout_ms,
                root_key=self.federation.root_public_key,
            )
            for name, server in self.ams.items()
        }
