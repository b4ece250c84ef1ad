"""fedbroker: a federated-testbed portal broker.

A REST/WebSocket gateway decoupled from slow heterogeneous testbed
backends: mutations become persisted typed events processed by parallel
workers, reads come from a periodically synchronized document cache.
Ships with an XML-RPC testbed simulator and a lifecycle monitor.
"""

__version__ = "0.1.0"
