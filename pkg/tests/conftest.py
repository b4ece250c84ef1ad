"""Shared fixtures: key material, simulated federations, full broker env."""

from __future__ import annotations

import pytest

from fedbroker.config import BrokerConfig, EndpointEntry
from fedbroker.gateway import GatewayServer
from fedbroker.model import generate_keypair, save_signing_key
from fedbroker.service import Broker
from fedbroker.sim import FederationServers, build_federation, fast_profile


@pytest.fixture()
def root_keys():
    return generate_keypair()


@pytest.fixture()
def fast_federation(root_keys):
    """In-memory federation state on the fast latency profile."""
    _, root_pub = root_keys
    return build_federation(fast_profile(), root_pub)


@pytest.fixture()
def fast_servers(fast_federation):
    servers = FederationServers(fast_federation).start()
    yield servers
    servers.stop()


class BrokerEnv:
    """Broker + gateway wired to live simulator servers."""

    def __init__(self, tmp_path, root_priv, servers: FederationServers,
                 *, store_retention=None, ws_ping_interval=30.0, scheduler=False,
                 sync_periods=None, timeout_ms=10_000, fsync=False):
        key_file = tmp_path / "root.key"
        save_signing_key(root_priv, key_file)
        self.servers = servers
        self.config = BrokerConfig(
            bind_host="127.0.0.1",
            bind_port=0,
            data_dir=tmp_path / "data",
            root_key_file=key_file,
            registry=EndpointEntry("registry", servers.registry.url, timeout_ms),
            testbeds=tuple(
                EndpointEntry(name, server.url, timeout_ms)
                for name, server in servers.ams.items()
            ),
            sync_periods=sync_periods or {"authorities": 86400, "resources": 3600,
                                          "leases": 300},
        )
        self.broker = Broker(self.config, fsync=fsync, store_retention=store_retention)
        self.broker.start(run_scheduler=scheduler)
        self.gateway = GatewayServer(self.broker, port=0,
                                     ws_ping_interval=ws_ping_interval)
        self.gateway.start()

    @property
    def url(self) -> str:
        return self.gateway.url

    @property
    def store(self):
        return self.broker.store

    def sync(self, target: str, testbed: str | None = None, timeout: float = 30.0):
        payload = {} if testbed is None else {"testbed": testbed}
        event = self.broker.submit(f"sync.{target}", payload, "onelab.portal")
        return self.broker.engine.wait_for(event.event_id, timeout=timeout)

    def sync_all(self, timeout: float = 60.0):
        self.sync("authorities", timeout=timeout)
        for name in self.broker.config.testbed_names():
            self.sync("resources", name, timeout=timeout)
            self.sync("leases", name, timeout=timeout)

    def close(self):
        self.gateway.stop()
        self.broker.stop()


@pytest.fixture()
def env(tmp_path, root_keys, fast_servers):
    environment = BrokerEnv(tmp_path, root_keys[0], fast_servers)
    yield environment
    environment.close()
