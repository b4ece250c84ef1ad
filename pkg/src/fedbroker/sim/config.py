"""Simulator fixtures: testbed inventories, latency profiles, failure scripts.

A fixture file is JSON:

    {
      "seed": 20260101,
      "registry": {"latency": "fixed(1.0)", "root_key_file": "root.key"},
      "testbeds": [
        {
          "name": "r2lab",
          "node_count": 37,
          "resource_type": "wifi",
          "exclusive": true,
          "latency": {"list_resources": "uniform(10,60)",
                      "allocate": "fixed(40)",
                      "other": "fixed(1.0)"},
          "geo": [43.60, 7.0, 43.65, 7.1],
          "failure_script": [{"window": [5, 8], "fault_code": 100}]
        }, ...
      ]
    }

Latency specs are ``fixed(v)`` or ``uniform(lo,hi)`` in seconds. The
shipped default reproduces the published testbed inventories; the fast
profile pins every latency to 10 ms for unit-scale runs.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

__all__ = [
    "ConfigInvalid",
    "LatencySpec",
    "SimTestbedConfig",
    "RegistrySimConfig",
    "FederationFixture",
    "default_fixture",
    "fast_profile",
    "load_fixture",
    "parse_latency",
]

_LATENCY_RE = re.compile(r"(fixed|uniform)\(([^)]*)\)\Z")


class ConfigInvalid(ValueError):
    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name


@dataclass(frozen=True)
class LatencySpec:
    kind: str  # "fixed" | "uniform"
    lo: float
    hi: float

    def sample(self, rng: random.Random) -> float:
        if self.kind == "fixed":
            return self.lo
        return rng.uniform(self.lo, self.hi)

    @property
    def mean(self) -> float:
        return self.lo if self.kind == "fixed" else (self.lo + self.hi) / 2

    def render(self) -> str:
        if self.kind == "fixed":
            return f"fixed({_fmt(self.lo)})"
        return f"uniform({_fmt(self.lo)},{_fmt(self.hi)})"


def _fmt(v: float) -> str:
    return f"{v:g}"


def parse_latency(text: str, field_name: str = "latency") -> LatencySpec:
    if isinstance(text, LatencySpec):
        return text
    match = _LATENCY_RE.match(str(text).replace(" ", ""))
    if not match:
        raise ConfigInvalid(field_name, f"expected fixed(v) or uniform(lo,hi), got {text!r}")
    kind, args = match.groups()
    try:
        values = [float(v) for v in args.split(",")]
    except ValueError:
        raise ConfigInvalid(field_name, f"non-numeric latency in {text!r}") from None
    if kind == "fixed":
        if len(values) != 1 or values[0] < 0:
            raise ConfigInvalid(field_name, f"fixed() takes one non-negative value, got {text!r}")
        return LatencySpec("fixed", values[0], values[0])
    if len(values) != 2 or values[0] < 0 or values[0] > values[1]:
        raise ConfigInvalid(field_name, f"uniform() needs 0 <= lo <= hi, got {text!r}")
    return LatencySpec("uniform", values[0], values[1])


@dataclass(frozen=True)
class FailureWindow:
    start: float
    end: float
    fault_code: int | str  # numeric wire fault, or "corrupt"


@dataclass(frozen=True)
class SimTestbedConfig:
    name: str
    node_count: int
    resource_type: str
    list_resources_latency: LatencySpec
    allocate_latency: LatencySpec
    other_latency: LatencySpec
    exclusive: bool = True
    geo: tuple[float, float, float, float] | None = None  # lat0, lon0, lat1, lon1
    description: str = ""
    failure_script: tuple[FailureWindow, ...] = ()

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise ConfigInvalid("node_count", f"{self.name}: must be >= 1")


@dataclass(frozen=True)
class RegistrySimConfig:
    latency: LatencySpec
    root_key_file: str = "root.key"


@dataclass(frozen=True)
class FederationFixture:
    seed: int
    registry: RegistrySimConfig
    testbeds: tuple[SimTestbedConfig, ...] = field(default_factory=tuple)

    def testbed(self, name: str) -> SimTestbedConfig:
        for tb in self.testbeds:
            if tb.name == name:
                return tb
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "registry": {
                "latency": self.registry.latency.render(),
                "root_key_file": self.registry.root_key_file,
            },
            "testbeds": [
                {
                    "name": tb.name,
                    "node_count": tb.node_count,
                    "resource_type": tb.resource_type,
                    "exclusive": tb.exclusive,
                    "latency": {
                        "list_resources": tb.list_resources_latency.render(),
                        "allocate": tb.allocate_latency.render(),
                        "other": tb.other_latency.render(),
                    },
                    "geo": list(tb.geo) if tb.geo else None,
                    "description": tb.description,
                    "failure_script": [
                        {"window": [w.start, w.end], "fault_code": w.fault_code}
                        for w in tb.failure_script
                    ],
                }
                for tb in self.testbeds
            ],
        }


def _testbed_from_json(raw: dict) -> SimTestbedConfig:
    try:
        name = raw["name"]
        node_count = int(raw["node_count"])
        resource_type = raw["resource_type"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid("testbeds", f"missing or bad field: {exc}") from None
    latency = raw.get("latency") or {}
    return SimTestbedConfig(
        name=name,
        node_count=node_count,
        resource_type=resource_type,
        list_resources_latency=parse_latency(
            latency.get("list_resources", "fixed(0.01)"), f"{name}.latency.list_resources"
        ),
        allocate_latency=parse_latency(
            latency.get("allocate", "fixed(0.01)"), f"{name}.latency.allocate"
        ),
        other_latency=parse_latency(
            latency.get("other", "fixed(0.01)"), f"{name}.latency.other"
        ),
        exclusive=bool(raw.get("exclusive", True)),
        geo=tuple(raw["geo"]) if raw.get("geo") else None,
        description=raw.get("description", ""),
        failure_script=tuple(
            FailureWindow(w["window"][0], w["window"][1], w["fault_code"])
            for w in raw.get("failure_script") or ()
        ),
    )


def load_fixture(source: str | Path | dict) -> FederationFixture:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raw = source
    if "registry" not in raw:
        raise ConfigInvalid("registry", "missing")
    registry = RegistrySimConfig(
        latency=parse_latency(raw["registry"].get("latency", "fixed(0.01)"), "registry.latency"),
        root_key_file=raw["registry"].get("root_key_file", "root.key"),
    )
    return FederationFixture(
        seed=int(raw.get("seed", 0)),
        registry=registry,
        testbeds=tuple(_testbed_from_json(tb) for tb in raw.get("testbeds", ())),
    )


# Bounding boxes: Paris, Sophia Antipolis, Volos, France, worldwide.
_GEO_PARIS = (48.82, 2.25, 48.90, 2.42)
_GEO_SOPHIA = (43.60, 7.00, 43.65, 7.10)
_GEO_VOLOS = (39.33, 22.90, 39.40, 23.00)
_GEO_FRANCE = (42.5, -4.0, 50.8, 8.0)
_GEO_WORLD = (-55.0, -180.0, 70.0, 180.0)


def default_fixture() -> FederationFixture:
    """The shipped federation: published node counts per testbed, latencies
    at the magnitudes the production portal contended with. The NITOS
    count is a documented placeholder; no figure was ever published."""
    slow = {
        "list_resources": "uniform(10,60)",
        "allocate": "fixed(40)",
        "other": "fixed(1.0)",
    }

    def tb(name, node_count, resource_type, geo, description, exclusive=True):
        return _testbed_from_json(
            {
                "name": name,
                "node_count": node_count,
                "resource_type": resource_type,
                "exclusive": exclusive,
                "latency": dict(slow),
                "geo": list(geo),
                "description": description,
            }
        )

    return FederationFixture(
        seed=20260101,
        registry=RegistrySimConfig(latency=parse_latency("fixed(1.0)")),
        testbeds=(
            tb("nitos", 100, "wifi", _GEO_VOLOS,
               "Wireless nodes, outdoor / RF-isolated / office environments. "
               "Node count is a placeholder; no published figure."),
            tb("fit-paris", 40, "wifi", _GEO_PARIS,
               "40 WiFi nodes in an indoor environment."),
            tb("r2lab", 37, "wifi", _GEO_SOPHIA,
               "37 WiFi nodes in an anechoic chamber."),
            tb("iotlab", 2728, "sensor", _GEO_FRANCE,
               "2728 wireless sensor nodes across six sites."),
            tb("ple", 300, "container", _GEO_WORLD,
               "300+ virtual container nodes worldwide.", exclusive=False),
        ),
    )


def fast_profile(fixture: FederationFixture | None = None) -> FederationFixture:
    """Same inventories, every latency pinned to 10 ms."""
    fixture = fixture or default_fixture()
    fast = parse_latency("fixed(0.01)")
    return replace(
        fixture,
        registry=replace(fixture.registry, latency=fast),
        testbeds=tuple(
            replace(
                tb,
                list_resources_latency=fast,
                allocate_latency=fast,
                other_latency=fast,
            )
            for tb in fixture.testbeds
        ),
    )
