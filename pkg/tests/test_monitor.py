"""Lifecycle probe tests against the fast simulated federation."""

import json
import threading
import time

import pytest

from fedbroker.monitor import (
    DEFAULT_PERIOD_SECONDS,
    ProbeConfig,
    ScheduledRunner,
    run_probe,
)
from fedbroker.monitor.cli import build_parser, main as monitor_main

STEP_NAMES = [
    "register", "login", "create_project", "create_slice",
    "list_resources", "create_lease", "delete_lease", "delete_slice",
]


@pytest.fixture()
def warm_env(env):
    env.sync("resources", "r2lab")
    return env


def test_probe_passes_all_eight_steps(warm_env, tmp_path):
    report_file = tmp_path / "reports.ndjson"
    report = run_probe(warm_env.url,
                       ProbeConfig(testbed="r2lab", report_file=str(report_file)))
    assert report.overall == "pass", report.to_json()
    assert [s.name for s in report.steps] == STEP_NAMES
    assert all(s.status == "pass" for s in report.steps)
    assert all(s.duration_ms >= 0 for s in report.steps)
    records = [json.loads(line) for line in report_file.read_text().splitlines()]
    assert len(records) == 1
    assert records[0]["overall"] == "pass"


def test_probe_is_self_cleaning(warm_env):
    report = run_probe(warm_env.url, ProbeConfig(testbed="r2lab"))
    assert report.overall == "pass"
    assert warm_env.store.count("slices") == 0
    assert warm_env.store.count("leases") == 0


def test_probe_identities_are_fresh_each_run(warm_env):
    first = run_probe(warm_env.url, ProbeConfig(testbed="r2lab"))
    time.sleep(1.1)  # second-resolution suffixes must differ
    second = run_probe(warm_env.url, ProbeConfig(testbed="r2lab"))
    assert first.overall == second.overall == "pass"
    users = [d.id for d in warm_env.store.query("users")]
    assert len(users) == 2


def test_probe_gateway_down_is_transport_failure(tmp_path):
    report = run_probe("http://127.0.0.1:9", ProbeConfig(report_file=str(tmp_path / "r.ndjson")))
    assert report.transport_failure
    assert report.steps == []
    assert report.overall == "fail"


def test_probe_aborts_mutations_after_failure(warm_env):
    # No resources synced for nitos: list_resources passes (empty filter
    # result fails the lease step instead).
    report = run_probe(warm_env.url, ProbeConfig(testbed="nitos"))
    statuses = {s.name: s.status for s in report.steps}
    assert report.overall == "fail"
    assert statuses["create_project"] == "pass"
    assert statuses["list_resources"] == "fail"
    assert statuses["create_lease"] == "skipped"
    assert statuses["delete_lease"] == "skipped"
    assert statuses["delete_slice"] == "skipped"


def test_cli_once_exit_codes(warm_env, tmp_path):
    assert monitor_main(["run", "--url", warm_env.url, "--once",
                         "--testbed", "r2lab",
                         "--report", str(tmp_path / "ok.ndjson")]) == 0
    assert monitor_main(["run", "--url", warm_env.url, "--once",
                         "--testbed", "nitos"]) == 1
    assert monitor_main(["run", "--url", "http://127.0.0.1:9", "--once"]) == 2


def test_cli_default_period_is_900():
    args = build_parser().parse_args(["run", "--url", "http://x"])
    assert args.period == DEFAULT_PERIOD_SECONDS == 900


def test_scheduled_runner_counts_and_spacing(warm_env, tmp_path):
    report_file = tmp_path / "sched.ndjson"
    runner = ScheduledRunner(warm_env.url, period_seconds=2.0,
                             config=ProbeConfig(testbed="r2lab", report_file=str(report_file)))
    thread = threading.Thread(target=runner.run_forever, daemon=True)
    thread.start()
    time.sleep(7.0)
    runner.stop()
    thread.join(timeout=5)
    for _ in range(50):  # let the last probe finish writing
        if len(runner.reports) >= 3 and not (runner._current and runner._current.is_alive()):
            break
        time.sleep(0.2)
    # Ticks at 2, 4, 6 seconds: exactly 3 probes in a 7 s window.
    records = [json.loads(line) for line in report_file.read_text().splitlines()]
    assert len(records) == 3
    assert all(r["overall"] == "pass" for r in records)


def test_scheduled_runner_skips_while_probe_hangs(monkeypatch, tmp_path):
    import fedbroker.monitor.probe as probe_module

    started = []

    def hanging_probe(url, config=None):
        started.append(time.monotonic())
        time.sleep(3.0)
        class _Fake:
            overall = "pass"
        return _Fake()

    monkeypatch.setattr(probe_module, "run_probe", hanging_probe)
    runner = probe_module.ScheduledRunner("http://x", period_seconds=0.5)
    thread = threading.Thread(target=runner.run_forever, daemon=True)
    thread.start()
    time.sleep(2.6)
    runner.stop()
    thread.join(timeout=5)
    assert len(started) == 1
    assert runner.skipped_ticks >= 2
