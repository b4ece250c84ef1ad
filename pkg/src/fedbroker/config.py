"""Broker configuration file handling.

JSON, loaded from ``--config`` or the FEDBROKER_CONFIG environment
variable (the variable wins). Relative paths inside the file resolve
against the file's own directory.

    {
      "bind": "127.0.0.1:8080",
      "data_dir": "data",
      "root_key_file": "root.key",
      "event_log_file": "events.ndjson",
      "registry": {"name": "registry", "url": "http://...", "timeout_ms": 90000},
      "testbeds": [{"name": "r2lab", "url": "http://...", "timeout_ms": 90000,
                    "description": "..."}, ...],
      "queue_workers": {"registry": 2, "testbed": 4, "sync": 2},
      "sync_periods": {"authorities": 86400, "resources": 3600, "leases": 300},
      "cors_origin": "http://localhost:5173"
    }
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .sfa.client import DEFAULT_TIMEOUT_MS
from .sync.scheduler import DEFAULT_PERIODS

ENV_VAR = "FEDBROKER_CONFIG"

DEFAULT_QUEUE_WORKERS = {"registry": 2, "testbed": 4, "sync": 2}


@dataclass(frozen=True)
class EndpointEntry:
    name: str
    url: str
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    description: str = ""


@dataclass(frozen=True)
class BrokerConfig:
    bind_host: str = "127.0.0.1"
    bind_port: int = 8080
    data_dir: Path = Path("data")
    root_key_file: Path = Path("root.key")
    event_log_file: str = "events.ndjson"
    registry: EndpointEntry = EndpointEntry("registry", "http://127.0.0.1:9000")
    testbeds: tuple[EndpointEntry, ...] = ()
    queue_workers: dict = field(default_factory=lambda: dict(DEFAULT_QUEUE_WORKERS))
    sync_periods: dict = field(default_factory=lambda: dict(DEFAULT_PERIODS))
    cors_origin: str | None = None
    ws_ping_interval: float = 30.0

    def testbed_names(self) -> list[str]:
        return [tb.name for tb in self.testbeds]

    def to_json(self) -> dict:
        return {
            "bind": f"{self.bind_host}:{self.bind_port}",
            "data_dir": str(self.data_dir),
            "root_key_file": str(self.root_key_file),
            "event_log_file": self.event_log_file,
            "registry": {
                "name": self.registry.name,
                "url": self.registry.url,
                "timeout_ms": self.registry.timeout_ms,
            },
            "testbeds": [
                {
                    "name": tb.name,
                    "url": tb.url,
                    "timeout_ms": tb.timeout_ms,
                    "description": tb.description,
                }
                for tb in self.testbeds
            ],
            "queue_workers": dict(self.queue_workers),
            "sync_periods": dict(self.sync_periods),
            "cors_origin": self.cors_origin,
            "ws_ping_interval": self.ws_ping_interval,
        }


def _endpoint(raw: dict, default_name: str) -> EndpointEntry:
    return EndpointEntry(
        name=raw.get("name", default_name),
        url=raw["url"],
        timeout_ms=int(raw.get("timeout_ms", DEFAULT_TIMEOUT_MS)),
        description=raw.get("description", ""),
    )


def config_from_json(raw: dict, base_dir: Path = Path(".")) -> BrokerConfig:
    bind = raw.get("bind", "127.0.0.1:8080")
    host, _, port = bind.rpartition(":")
    defaults = BrokerConfig()

    def _resolve(value: str) -> Path:
        path = Path(value)
        return path if path.is_absolute() else base_dir / path

    return BrokerConfig(
        bind_host=host or "127.0.0.1",
        bind_port=int(port),
        data_dir=_resolve(raw.get("data_dir", "data")),
        root_key_file=_resolve(raw.get("root_key_file", "root.key")),
        event_log_file=raw.get("event_log_file", "events.ndjson"),
        registry=_endpoint(raw["registry"], "registry") if "registry" in raw else defaults.registry,
        testbeds=tuple(_endpoint(tb, f"testbed{i}") for i, tb in enumerate(raw.get("testbeds", ()))),
        queue_workers=dict(DEFAULT_QUEUE_WORKERS, **raw.get("queue_workers", {})),
        sync_periods=dict(DEFAULT_PERIODS, **raw.get("sync_periods", {})),
        cors_origin=raw.get("cors_origin"),
        ws_ping_interval=float(raw.get("ws_ping_interval", 30.0)),
    )


def load_config(path: str | Path | None = None) -> BrokerConfig:
    env_path = os.environ.get(ENV_VAR)
    if env_path:
        path = env_path
    if path is None:
        raise FileNotFoundError(f"no config path given and {ENV_VAR} is unset")
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return config_from_json(raw, base_dir=path.parent.resolve())
