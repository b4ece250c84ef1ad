"""Simulated federation backends: registry and AM servers with fixtures."""

from .config import (
    ConfigInvalid,
    FederationFixture,
    LatencySpec,
    RegistrySimConfig,
    SimTestbedConfig,
    default_fixture,
    fast_profile,
    load_fixture,
    parse_latency,
)
from .oracle import OccupancyGrid, occupied_minutes
from .servers import AmServer, BindError, FederationServers, RegistryServer
from .state import (
    AllocationDecision,
    AmSim,
    RegistrySim,
    SimFault,
    SimFederation,
    SimLease,
    build_federation,
    testbed_authority_hrn,
    MONITOR_AUTHORITY,
    ROOT_HRN,
)

__all__ = [name for name in dir() if not name.startswith("_")]
