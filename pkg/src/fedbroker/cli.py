"""``fedbroker``: serve the broker, run one-shot syncs, emit fixtures,
and host the simulated federation for desk-scale work.

A full local setup:

    fedbroker fixtures --out site          # fixture.json, root.key, config.json
    fedbroker sim --site site              # registry + AM servers on 9100+
    fedbroker serve --config site/config.json
    fedbroker-monitor run --url http://127.0.0.1:8080 --once
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import threading
from pathlib import Path

from .config import load_config
from .engine.events import EventType
from .model import generate_keypair, public_key_bytes, save_signing_key, load_signing_key
from .service import Broker
from .sim import FederationServers, build_federation, default_fixture, load_fixture

SIM_BASE_PORT = 9100
GATEWAY_BIND = "127.0.0.1:8080"


def cmd_fixtures(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fixture = default_fixture()
    key, _ = generate_keypair()
    save_signing_key(key, out / "root.key")
    (out / "fixture.json").write_text(json.dumps(fixture.to_json(), indent=2) + "\n")
    config = {
        "bind": GATEWAY_BIND,
        "data_dir": "data",
        "root_key_file": "root.key",
        "event_log_file": "events.ndjson",
        "registry": {"name": "registry", "url": f"http://127.0.0.1:{SIM_BASE_PORT}"},
        "testbeds": [
            {
                "name": tb.name,
                "url": f"http://127.0.0.1:{SIM_BASE_PORT + 1 + i}",
                "description": tb.description,
            }
            for i, tb in enumerate(fixture.testbeds)
        ],
        "queue_workers": {"registry": 2, "testbed": 4, "sync": 2},
        "sync_periods": {"authorities": 86400, "resources": 3600, "leases": 300},
        "cors_origin": "http://localhost:5173",
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    print(f"wrote {out}/fixture.json, {out}/root.key, {out}/config.json")
    return 0


def cmd_sim(args) -> int:
    site = Path(args.site)
    fixture = load_fixture(site / "fixture.json")
    root_key = load_signing_key(site / fixture.registry.root_key_file)
    federation = build_federation(fixture, public_key_bytes(root_key))
    servers = FederationServers(federation)
    servers.registry.port = args.base_port
    for i, name in enumerate(federation.ams):
        servers.ams[name].port = args.base_port + 1 + i
    servers.start()
    print(f"registry: {servers.registry.url}")
    for name, server in servers.ams.items():
        print(f"{name}: {server.url}")
    _wait_for_signal()
    servers.stop()
    return 0


def cmd_serve(args) -> int:
    from .gateway import GatewayServer

    config = load_config(args.config)
    broker = Broker(config)
    broker.start()
    gateway = GatewayServer(broker)
    gateway.start()
    print(f"gateway listening on {gateway.url}")
    _wait_for_signal()
    gateway.stop()
    broker.stop()
    return 0


def cmd_sync(args) -> int:
    from .engine.events import Event, EventStatus, now_iso
    from .sync.handlers import build_sync_handlers

    config = load_config(args.config)
    broker = Broker(config)
    target = args.target
    scopes = [args.testbed] if args.testbed else (
        [None] if target == "authorities" else config.testbed_names()
    )
    # One-shot: run the handler inline, no queues involved.
    handlers = build_sync_handlers(broker.context)
    event_type = EventType(f"sync.{target}")
    failures = 0
    for scope in scopes:
        payload = {} if scope is None else {"testbed": scope}
        probe_event = Event(
            event_id="oneshot", type=event_type, payload=payload,
            status=EventStatus.running, attempts=1, created_at=now_iso(),
            actor="onelab.portal",
        )
        try:
            stats = handlers[event_type](probe_event)
            print(json.dumps({"target": target, "testbed": scope, **stats}))
        except Exception as exc:
            failures += 1
            print(json.dumps({"target": target, "testbed": scope, "error": str(exc)}),
                  file=sys.stderr)
    broker.stop()
    return 1 if failures else 0


def _wait_for_signal() -> None:
    stop = threading.Event()
    try:
        for sig in (signal.SIGINT, signal.SIGTERM):
            signal.signal(sig, lambda *_: stop.set())
    except ValueError:
        pass  # not on the main thread (embedded in tests); block until killed
    stop.wait()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedbroker")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run broker and gateway")
    serve.add_argument("--config", help="config file (or FEDBROKER_CONFIG)")
    serve.set_defaults(fn=cmd_serve)

    sync = sub.add_parser("sync", help="one-shot cache refresh")
    sync.add_argument("--config", help="config file (or FEDBROKER_CONFIG)")
    sync.add_argument("--target", required=True,
                      choices=["authorities", "resources", "leases"])
    sync.add_argument("--testbed", help="limit to one testbed")
    sync.set_defaults(fn=cmd_sync)

    fixtures = sub.add_parser("fixtures", help="write default fixture, key, config")
    fixtures.add_argument("--out", required=True)
    fixtures.set_defaults(fn=cmd_fixtures)

    sim = sub.add_parser("sim", help="serve the simulated federation")
    sim.add_argument("--site", required=True, help="directory from `fedbroker fixtures`")
    sim.add_argument("--base-port", type=int, default=SIM_BASE_PORT)
    sim.set_defaults(fn=cmd_sim)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
