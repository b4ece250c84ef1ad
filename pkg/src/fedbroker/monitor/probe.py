"""Synthetic lifecycle probe driving the public REST/WS API.

One probe run walks the full experimenter lifecycle with disposable,
timestamp-suffixed identities under the ``onelab.monitor`` namespace:

    register, login, create_project, create_slice, list_resources,
    create_lease, delete_lease, delete_slice

Each step's latency and outcome land in a ProbeReport, printed as one
JSON record and appended to the report log. A failed step aborts every
later mutation step; a passing run leaves no objects behind.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import requests

DEFAULT_PERIOD_SECONDS = 900

STEP_TIMEOUTS = {
    "register": 30.0,
    "login": 30.0,
    "create_project": 30.0,
    "create_slice": 30.0,
    "list_resources": 5.0,
    "create_lease": 120.0,
    "delete_lease": 120.0,
    "delete_slice": 30.0,
}

MUTATION_STEPS = {
    "register", "create_project", "create_slice",
    "create_lease", "delete_lease", "delete_slice",
}


class TransportFailure(Exception):
    pass


def _iso(dt: datetime) -> str:
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class StepResult:
    name: str
    duration_ms: int
    status: str  # pass | fail | skipped
    event_id: str | None = None
    error: str | None = None

    def to_json(self) -> dict:
        record = {"name": self.name, "duration_ms": self.duration_ms, "status": self.status}
        if self.event_id:
            record["event_id"] = self.event_id
        if self.error:
            record["error"] = self.error
        return record


@dataclass
class ProbeReport:
    started_at: str
    gateway: str
    steps: list[StepResult] = field(default_factory=list)
    transport_failure: bool = False

    @property
    def overall(self) -> str:
        return "pass" if all(s.status == "pass" for s in self.steps) and self.steps else "fail"

    def to_json(self) -> dict:
        return {
            "started_at": self.started_at,
            "gateway": self.gateway,
            "overall": self.overall,
            "steps": [s.to_json() for s in self.steps],
        }


@dataclass
class ProbeConfig:
    testbed: str | None = None
    report_file: str | None = None
    lease_lead_seconds: int = 120
    lease_duration_seconds: int = 180


class _EventWaiter:
    """Terminal-state watcher: WebSocket stream with polling fallback."""

    def __init__(self, base_url: str, session: requests.Session):
        self._base_url = base_url
        self._session = session
        self._ws = None

    def connect(self, token: str) -> None:
        try:
            from websockets.sync.client import connect

            ws_url = self._base_url.replace("http://", "ws://", 1) + "/api/v1/ws"
            self._ws = connect(ws_url, subprotocols=["fedbroker.v1"], open_timeout=5)
            self._ws.send(json.dumps({"action": "auth", "token": token}))
            self._ws.send(json.dumps({"action": "subscribe", "collections": ["events"]}))
        except Exception:
            self._ws = None  # polling fallback

    def wait(self, event_id: str, timeout: float) -> dict:
        deadline = time.monotonic() + timeout
        if self._ws is not None:
            try:
                return self._wait_ws(event_id, deadline)
            except TimeoutError:
                raise
            except Exception:
                self._ws = None
        return self._wait_poll(event_id, deadline)

    def _wait_ws(self, event_id: str, deadline: float) -> dict:
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError(f"event {event_id} not terminal in time")
            frame = json.loads(self._ws.recv(timeout=remaining))
            if frame.get("type") != "change" or frame.get("id") != event_id:
                continue
            body = frame.get("body", {})
            if body.get("status") in ("success", "error"):
                return body

    def _wait_poll(self, event_id: str, deadline: float) -> dict:
        while True:
            response = self._session.get(f"{self._base_url}/api/v1/events/{event_id}", timeout=10)
            if response.status_code == 200:
                body = response.json()["body"]
                if body.get("status") in ("success", "error"):
                    return body
            if time.monotonic() >= deadline:
                raise TimeoutError(f"event {event_id} not terminal in time")
            time.sleep(0.25)

    def close(self) -> None:
        if self._ws is not None:
            try:
                self._ws.close()
            except Exception:
                pass


class Probe:
    def __init__(self, gateway_url: str, config: ProbeConfig | None = None):
        self.url = gateway_url.rstrip("/")
        self.config = config or ProbeConfig()
        self.session = requests.Session()
        self.token: str | None = None

    # -- http plumbing ----------------------------------------------------------

    def _request(self, method: str, path: str, **kwargs):
        headers = kwargs.pop("headers", {})
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            return self.session.request(
                method, f"{self.url}{path}", headers=headers, timeout=15, **kwargs
            )
        except requests.RequestException as exc:
            raise TransportFailure(str(exc)) from None

    # -- steps ----------------------------------------------------------

    def run(self) -> ProbeReport:
        report = ProbeReport(
            started_at=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ"),
            gateway=self.url,
        )
        suffix = f"{int(time.time())}{random.randrange(1000):03d}"
        user_hrn = f"onelab.monitor.m{suffix}"
        project_hrn = f"onelab.monitor.p{suffix}"
        slice_hrn = f"{project_hrn}.s0"
        waiter = _EventWaiter(self.url, self.session)
        state: dict = {}
        steps = [
            ("register", lambda: self._register(user_hrn)),
            ("login", lambda: self._login(user_hrn, waiter)),
            ("create_project", lambda: self._create(waiter, "/api/v1/projects", {"hrn": project_hrn})),
            ("create_slice", lambda: self._create(waiter, "/api/v1/slices", {"hrn": slice_hrn})),
            ("list_resources", lambda: self._list_resources(state)),
            ("create_lease", lambda: self._create_lease(waiter, slice_hrn, state)),
            ("delete_lease", lambda: self._delete(waiter, f"/api/v1/leases/{state.get('lease_id')}")),
            ("delete_slice", lambda: self._delete(waiter, f"/api/v1/slices/{slice_hrn}")),
        ]
        failed = False
        try:
            for name, action in steps:
                if failed:
                    report.steps.append(StepResult(name, 0, "skipped"))
                    continue
                started = time.monotonic()
                try:
                    event_id = action()
                    duration = int((time.monotonic() - started) * 1000)
                    report.steps.append(StepResult(name, duration, "pass", event_id=event_id))
                except TransportFailure:
                    raise
                except Exception as exc:
                    duration = int((time.monotonic() - started) * 1000)
                    report.steps.append(
                        StepResult(name, duration, "fail",
                                   event_id=state.pop("last_event_id", None), error=str(exc))
                    )
                    failed = True
        except TransportFailure as exc:
            report.transport_failure = True
            if not report.steps:
                pass  # gateway unreachable before any step completed
            else:
                report.steps.append(StepResult("transport", 0, "fail", error=str(exc)))
        finally:
            waiter.close()
        self._emit(report)
        return report

    def _register(self, user_hrn: str) -> str:
        response = self._request(
            "POST", "/api/v1/auth/register",
            json={"hrn": user_hrn, "email": f"{user_hrn.split('.')[-1]}@monitor.example"},
        )
        if response.status_code != 202:
            raise RuntimeError(f"register: {response.status_code} {response.text}")
        event_id = response.json()["event_id"]
        # No session yet, so watch the event document directly.
        deadline = time.monotonic() + STEP_TIMEOUTS["register"]
        while True:
            event = self._request("GET", f"/api/v1/events/{event_id}").json()["body"]
            if event["status"] == "success":
                return event_id
            if event["status"] == "error":
                raise RuntimeError(f"register failed: {event['error']}")
            if time.monotonic() >= deadline:
                raise TimeoutError("register event not terminal in time")
            time.sleep(0.2)

    def _login(self, user_hrn: str, waiter: _EventWaiter) -> None:
        response = self._request("POST", "/api/v1/auth/login", json={"hrn": user_hrn})
        if response.status_code != 200:
            raise RuntimeError(f"login: {response.status_code} {response.text}")
        self.token = response.json()["token"]
        waiter.connect(self.token)
        return None

    def _create(self, waiter: _EventWaiter, path: str, payload: dict) -> str:
        response = self._request("POST", path, json=payload)
        if response.status_code != 202:
            raise RuntimeError(f"{path}: {response.status_code} {response.text}")
        event_id = response.json()["event_id"]
        step = "create_project" if "projects" in path else "create_slice"
        event = waiter.wait(event_id, STEP_TIMEOUTS[step])
        if event["status"] != "success":
            raise RuntimeError(f"{path} event failed: {event['error']}")
        return event_id

    def _list_resources(self, state: dict) -> None:
        params = {"available": "true", "limit": 100}
        if self.config.testbed:
            params["testbed"] = self.config.testbed
        response = self._request("GET", "/api/v1/resources", params=params)
        if response.status_code != 200:
            raise RuntimeError(f"resources: {response.status_code} {response.text}")
        items = response.json()["items"]
        exclusive = [i["body"] for i in items if i["body"].get("exclusive")]
        if not exclusive:
            raise RuntimeError("no exclusive resources available to lease")
        state["candidates"] = exclusive
        return None

    def _free_resource(self, candidates: list[dict], start, end) -> dict:
        """Pick a node whose cached leases leave the window free, the way
        the portal's timeline picker steers users to free slots."""
        occupied = set()
        for body in candidates:
            response = self._request("GET", "/api/v1/leases",
                                     params={"testbed": body["testbed"]})
            if response.status_code != 200:
                break
            for item in response.json()["items"]:
                lease = item["body"]
                if lease["start_time"] < _iso(end) and _iso(start) < lease["end_time"]:
                    occupied.update(lease["components"])
            break  # one testbed per probe; a single query suffices
        free = [c for c in candidates if c["component_id"] not in occupied]
        if not free:
            raise RuntimeError("no component free in the probe window")
        return random.choice(free)

    def _create_lease(self, waiter: _EventWaiter, slice_hrn: str, state: dict) -> str:
        now = datetime.now(timezone.utc)
        start = (now + timedelta(seconds=self.config.lease_lead_seconds)).replace(
            second=0, microsecond=0
        ) + timedelta(minutes=1)
        end = start + timedelta(seconds=self.config.lease_duration_seconds)
        resource = self._free_resource(state["candidates"], start, end)
        response = self._request(
            "POST", "/api/v1/leases",
            json={
                "slice_hrn": slice_hrn,
                "testbed": resource["testbed"],
                "component_ids": [resource["component_id"]],
                "start_time": start.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "end_time": end.strftime("%Y-%m-%dT%H:%M:%SZ"),
            },
        )
        if response.status_code != 202:
            raise RuntimeError(f"leases: {response.status_code} {response.text}")
        event_id = response.json()["event_id"]
        state["last_event_id"] = event_id
        event = waiter.wait(event_id, STEP_TIMEOUTS["create_lease"])
        if event["status"] != "success":
            raise RuntimeError(f"lease event failed: {event['error']}")
        state["lease_id"] = event["result"]["lease_id"]
        state.pop("last_event_id", None)
        return event_id

    def _delete(self, waiter: _EventWaiter, path: str) -> str:
        response = self._request("DELETE", path)
        if response.status_code != 202:
            raise RuntimeError(f"{path}: {response.status_code} {response.text}")
        event_id = response.json()["event_id"]
        step = "delete_lease" if "leases" in path else "delete_slice"
        event = waiter.wait(event_id, STEP_TIMEOUTS[step])
        if event["status"] != "success":
            raise RuntimeError(f"{path} event failed: {event['error']}")
        return event_id

    def _emit(self, report: ProbeReport) -> None:
        record = json.dumps(report.to_json(), separators=(",", ":"))
        print(record, flush=True)
        if self.config.report_file:
            with open(self.config.report_file, "a", encoding="utf-8") as fh:
                fh.write(record + "\n")


def run_probe(gateway_url: str, config: ProbeConfig | None = None) -> ProbeReport:
    return Probe(gateway_url, config).run()


class ScheduledRunner:
    """One probe per period; the first fires a full period after start,
    and a tick is skipped (and logged) while the previous probe runs."""

    def __init__(self, gateway_url: str, period_seconds: float = DEFAULT_PERIOD_SECONDS,
                 config: ProbeConfig | None = None):
        self.gateway_url = gateway_url
        self.period = period_seconds
        self.config = config
        self.reports: list[ProbeReport] = []
        self.skipped_ticks = 0
        self._stop = threading.Event()
        self._current: threading.Thread | None = None

    def run_forever(self) -> None:
        next_tick = time.monotonic() + self.period
        while not self._stop.is_set():
            delay = next_tick - time.monotonic()
            if delay > 0:
                if self._stop.wait(min(delay, 0.2)):
                    break
                continue
            next_tick += self.period
            if self._current is not None and self._current.is_alive():
                self.skipped_ticks += 1
                print(json.dumps({"skipped_tick": True,
                                  "reason": "previous probe still running"}), flush=True)
                continue
            self._current = threading.Thread(target=self._probe_once, daemon=True)
            self._current.start()

    def _probe_once(self) -> None:
        try:
            self.reports.append(run_probe(self.gateway_url, self.config))
        except Exception as exc:  # pragma: no cover - probe never kills the loop
            print(json.dumps({"probe_error": str(exc)}), flush=True)

    def stop(self) -> None:
        self._stop.set()
