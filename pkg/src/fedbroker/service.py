"""Broker assembly: store, clients, engine, and sync scheduler as one unit.

The broker owns the federation root signing key and self-issues an
operator credential at startup; handlers use it for registry bootstrap
and cache synchronization, while per-user actions run under the user's
own stored credentials.
"""

from __future__ import annotations

from pathlib import Path

from .config import BrokerConfig
from .engine import (
    EventEngine,
    HandlerContext,
    QueueName,
    QueueSpec,
    build_handlers,
)
from .engine.handlers import OPERATOR_HRN
from .model import (
    Privilege,
    RecordType,
    issue_credential,
    load_signing_key,
    parse_hrn,
    public_key_bytes,
)
from .sfa import AmClient, EndpointConfig, RegistryClient
from .store import DocumentStore
from .sync import SyncScheduler, build_sync_handlers, default_schedules

OPERATOR_CREDENTIAL_TTL = 30 * 86400


class Broker:
    def __init__(self, config: BrokerConfig, *, fsync: bool = True,
                 store_retention: int | None = None):
        self.config = config
        data_dir = Path(config.data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        store_args = {"fsync": fsync}
        if store_retention is not None:
            store_args["retention"] = store_retention
        self.store = DocumentStore(data_dir / "db", **store_args)
        self.root_private_key = load_signing_key(config.root_key_file)
        self.root_public_key = public_key_bytes(self.root_private_key)
        root_hrn = parse_hrn("onelab")
        self.operator_credential = issue_credential(
            self.root_private_key,
            subject=parse_hrn(OPERATOR_HRN),
            object=root_hrn,
            object_type=RecordType.authority,
            privileges=frozenset(Privilege),
            ttl_seconds=OPERATOR_CREDENTIAL_TTL,
            issuer=root_hrn,
        )
        self.registry_client = RegistryClient(
            EndpointConfig(
                name=config.registry.name,
                url=config.registry.url,
                timeout_ms=config.registry.timeout_ms,
                root_key=self.root_public_key,
            )
        )
        self.am_clients = {
            tb.name: AmClient(
                EndpointConfig(name=tb.name, url=tb.url, timeout_ms=tb.timeout_ms,
                               root_key=self.root_public_key)
            )
            for tb in config.testbeds
        }
        self.context = HandlerContext(
            store=self.store,
            registry=self.registry_client,
            ams=self.am_clients,
            root_private_key=self.root_private_key,
            root_public_key=self.root_public_key,
            operator_credential=self.operator_credential,
            root_hrn=root_hrn,
        )
        handlers = build_handlers(self.context)
        handlers.update(build_sync_handlers(self.context))
        queues = {
            QueueName(name): QueueSpec(QueueName(name), workers=workers)
            for name, workers in config.queue_workers.items()
        }
        self.engine = EventEngine(
            self.store, handlers, queues,
            log_path=data_dir / config.event_log_file,
        )
        self.context.submit = self.engine.submit
        self.scheduler = SyncScheduler(
            default_schedules(config.sync_periods),
            self.engine.submit,
            self.store,
            config.testbed_names(),
            actor=OPERATOR_HRN,
        )
        self._started = False

    # -- lifecycle ---------------------------------------------------------------

    def start(self, *, run_scheduler: bool = True) -> "Broker":
        self.engine.start()
        if run_scheduler:
            self.scheduler.start()
        self._started = True
        return self

    def stop(self) -> None:
        if self._started:
            self.scheduler.stop()
            self.engine.stop()
            self._started = False
        self.store.close()

    # -- conveniences ---------------------------------------------------------------

    def submit(self, event_type, payload, actor):
        return self.engine.submit(event_type, payload, actor)

    def backend_calls(self) -> int:
        """Total XML-RPC calls issued; read paths must never move this."""
        return self.context.backend_calls()
