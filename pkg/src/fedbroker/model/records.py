"""Registry record type shared by broker, clients, and simulator."""

from __future__ import annotations

from dataclasses import dataclass, field

from .names import Hrn, RecordType


@dataclass(frozen=True)
class Record:
    """Directory entry held by the federation registry.

    ``email`` applies to users; ``members`` to projects and slices;
    ``public_key`` (raw Ed25519 verification key bytes) to users and
    authorities. Timestamps are RFC 3339 UTC strings assigned by the
    registry on registration.
    """

    hrn: Hrn
    type: RecordType
    email: str | None = None
    members: tuple[str, ...] = field(default_factory=tuple)
    public_key: bytes | None = None
    created_at: str | None = None
    updated_at: str | None = None

    def __post_init__(self) -> None:
        if self.type is RecordType.project and len(self.hrn.segments) < 2:
            raise ValueError(f"project {self.hrn.render()} must live under an authority")
        if self.type is RecordType.slice and len(self.hrn.segments) < 3:
            raise ValueError(f"slice {self.hrn.render()} must live under a project")
