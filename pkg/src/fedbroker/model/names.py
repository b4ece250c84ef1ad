"""Hierarchical names for the federation.

An Hrn is a dot-joined path of lowercase atoms rooted at a federation
authority (``onelab.upmc.myproj``). A Urn is its ``urn:publicid:IDN``
rendering, the form exchanged with aggregate managers. Both round-trip
losslessly through their text forms.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

__all__ = [
    "Hrn",
    "Urn",
    "UrnType",
    "RecordType",
    "MalformedHrn",
    "MalformedUrn",
    "InvalidCombination",
    "parse_hrn",
    "parse_urn",
    "hrn_to_urn",
    "urn_to_hrn",
]

_ATOM_RE = re.compile(r"[a-z0-9_]{1,64}\Z")
# URN authority parts also name testbeds, whose ids may carry dashes.
_URN_ATOM_RE = re.compile(r"[a-z0-9_\-.]{1,64}\Z")

AUTHORITY_URN_NAME = "sa"


class MalformedHrn(ValueError):
    """Raised when text is not a valid dotted hrn.

    ``position`` is the 1-based index of the offending segment.
    """

    def __init__(self, position: int, reason: str):
        super().__init__(f"segment {position}: {reason}")
        self.position = position
        self.reason = reason


class MalformedUrn(ValueError):
    pass


class InvalidCombination(ValueError):
    """A record type was requested for an hrn that cannot carry it."""


class RecordType(str, enum.Enum):
    authority = "authority"
    user = "user"
    project = "project"
    slice = "slice"


class UrnType(str, enum.Enum):
    authority = "authority"
    user = "user"
    slice = "slice"
    sliver = "sliver"
    node = "node"


@dataclass(frozen=True)
class Hrn:
    """Hierarchical name: an ordered tuple of lowercase atoms."""

    segments: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise MalformedHrn(1, "empty hrn")
        for i, atom in enumerate(self.segments):
            if not _ATOM_RE.match(atom):
                reason = "empty segment" if not atom else f"illegal atom {atom!r}"
                raise MalformedHrn(i + 1, reason)

    def render(self) -> str:
        return ".".join(self.segments)

    def parent(self) -> Hrn:
        if len(self.segments) == 1:
            raise InvalidCombination(f"{self.render()} is a root authority; no parent")
        return Hrn(self.segments[:-1])

    @property
    def leaf(self) -> str:
        return self.segments[-1]

    def is_ancestor_of(self, other: Hrn) -> bool:
        """True for proper ancestors and for ``other`` itself."""
        return other.segments[: len(self.segments)] == self.segments

    def child(self, atom: str) -> Hrn:
        return Hrn(self.segments + (atom,))

    def __str__(self) -> str:  # pragma: no cover - convenience
        return self.render()


def parse_hrn(text: str) -> Hrn:
    """Parse dotted text into an Hrn, validating every atom."""
    if not isinstance(text, str) or text == "":
        raise MalformedHrn(1, "empty hrn")
    return Hrn(tuple(text.split(".")))


@dataclass(frozen=True)
class Urn:
    """``urn:publicid:IDN`` name: authority path, object type, leaf name."""

    authority: tuple[str, ...]
    type: UrnType
    name: str

    def __post_init__(self) -> None:
        if not self.authority:
            raise MalformedUrn("empty authority")
        for atom in self.authority:
            if not _URN_ATOM_RE.match(atom):
                raise MalformedUrn(f"illegal authority atom {atom!r}")
        if not _URN_ATOM_RE.match(self.name):
            raise MalformedUrn(f"illegal name {self.name!r}")

    def render(self) -> str:
        return f"urn:publicid:IDN+{':'.join(self.authority)}+{self.type.value}+{self.name}"

    def __str__(self) -> str:  # pragma: no cover - convenience
        return self.render()


def parse_urn(text: str) -> Urn:
    if not isinstance(text, str) or not text.startswith("urn:publicid:IDN+"):
        raise MalformedUrn(f"not a publicid urn: {text!r}")
    rest = text[len("urn:publicid:IDN+"):]
    parts = rest.split("+")
    if len(parts) != 3:
        raise MalformedUrn(f"expected authority+type+name, got {rest!r}")
    authority, type_name, name = parts
    try:
        urn_type = UrnType(type_name)
    except ValueError:
        raise MalformedUrn(f"unknown urn type {type_name!r}") from None
    return Urn(tuple(authority.split(":")), urn_type, name)


# Projects render as authority-style urns: the registry models a project
# as a sub-authority, so its urn carries the full hrn as the authority
# path and the conventional "sa" name atom.
_RECORD_TO_URN_TYPE = {
    RecordType.authority: UrnType.authority,
    RecordType.project: UrnType.authority,
    RecordType.user: UrnType.user,
    RecordType.slice: UrnType.slice,
}


def hrn_to_urn(hrn: Hrn, record_type: RecordType) -> Urn:
    """Render an hrn as the urn for one of the registry record types."""
    urn_type = _RECORD_TO_URN_TYPE[RecordType(record_type)]
    if urn_type is UrnType.authority:
        return Urn(hrn.segments, UrnType.authority, AUTHORITY_URN_NAME)
    if len(hrn.segments) < 2:
        raise InvalidCombination(
            f"{record_type} urn needs a parent authority; {hrn.render()} has one segment"
        )
    return Urn(hrn.segments[:-1], urn_type, hrn.leaf)


def urn_to_hrn(urn: Urn) -> Hrn:
    """Recover the hrn a urn was rendered from."""
    if urn.type is UrnType.authority:
        return Hrn(urn.authority)
    return Hrn(urn.authority + (urn.name,))
