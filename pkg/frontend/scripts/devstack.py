"""Development/test stack: fast-profile simulators + broker + gateway.

Prints one JSON line {"url": ...} when ready, then serves until stdin
closes. The r2lab inventory is synced before readiness so the portal
has resources to browse immediately.
"""

import json
import sys
import tempfile
from pathlib import Path

from fedbroker.config import BrokerConfig, EndpointEntry
from fedbroker.gateway import GatewayServer
from fedbroker.model import generate_keypair, save_signing_key
from fedbroker.service import Broker
from fedbroker.sim import FederationServers, build_federation, fast_profile


def main() -> int:
    root_priv, root_pub = generate_keypair()
    servers = FederationServers(build_federation(fast_profile(), root_pub)).start()
    workdir = Path(tempfile.mkdtemp(prefix="fedbroker-devstack-"))
    key_file = workdir / "root.key"
    save_signing_key(root_priv, key_file)
    config = BrokerConfig(
        bind_host="127.0.0.1",
        bind_port=0,
        data_dir=workdir / "data",
        root_key_file=key_file,
        registry=EndpointEntry("registry", servers.registry.url, 10_000),
        testbeds=tuple(
            EndpointEntry(name, server.url, 10_000, description=f"simulated {name}")
            for name, server in servers.ams.items()
        ),
        cors_origin="http://localhost:5173",
    )
    broker = Broker(config, fsync=False).start(run_scheduler=False)
    for target, testbed in [("authorities", None), ("resources", "r2lab"), ("leases", "r2lab")]:
        payload = {} if testbed is None else {"testbed": testbed}
        event = broker.submit(f"sync.{target}", payload, "onelab.portal")
        broker.engine.wait_for(event.event_id, timeout=30)
    gateway = GatewayServer(broker, ws_ping_interval=5.0).start()
    print(json.dumps({"url": gateway.url}), flush=True)
    try:
        sys.stdin.read()
    except KeyboardInterrupt:
        pass
    gateway.stop()
    broker.stop()
    servers.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
