"""Resource-description XML codec for the aggregate-manager wire.

The grammar is fixed and canonical: attribute order, two-space
indentation, RFC 3339 UTC second-precision timestamps, coordinates with
six decimals. ``decode_rspec(encode_rspec(r)) == r`` on the valid
domain. Leases are accepted in every variant; advertisements use them
to publish the testbed's active reservations alongside its inventory.
"""

from __future__ import annotations

import enum
import xml.parsers.expat
from dataclasses import dataclass
from datetime import datetime, timezone
from xml.sax.saxutils import escape

from .names import parse_urn, MalformedUrn
from .resources import Resource, MIN_LEASE_SECONDS

__all__ = [
    "RspecVariant",
    "RspecLease",
    "RSpec",
    "RspecParseError",
    "encode_rspec",
    "decode_rspec",
]


class RspecVariant(str, enum.Enum):
    advertisement = "advertisement"
    request = "request"
    manifest = "manifest"


class RspecParseError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class RspecLease:
    components: tuple[str, ...]
    start_time: datetime
    end_time: datetime


@dataclass(frozen=True)
class RSpec:
    variant: RspecVariant
    nodes: tuple[Resource, ...] = ()
    leases: tuple[RspecLease, ...] = ()


def _ts(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _attr(value: str) -> str:
    return escape(value, {'"': "&quot;"})


def _bool(flag: bool) -> str:
    return "true" if flag else "false"


def encode_rspec(rspec: RSpec) -> bytes:
    lines: list[str] = []
    for node in rspec.nodes:
        lines.append(
            f'  <node component_id="{_attr(node.component_id.render())}"'
            f' component_name="{_attr(node.name)}"'
            f' exclusive="{_bool(node.exclusive)}">'
        )
        lines.append(f'    <hardware_type name="{_attr(node.resource_type)}"/>')
        if node.latitude is not None and node.longitude is not None:
            lines.append(
                f'    <location latitude="{node.latitude:.6f}"'
                f' longitude="{node.longitude:.6f}"/>'
            )
        lines.append(f'    <available now="{_bool(node.available)}"/>')
        lines.append("  </node>")
    for lease in rspec.leases:
        lines.append(
            f'  <lease start_time="{_ts(lease.start_time)}"'
            f' end_time="{_ts(lease.end_time)}">'
        )
        for cid in lease.components:
            lines.append(f'    <node component_id="{_attr(cid)}"/>')
        lines.append("  </lease>")
    if not lines:
        return f'<rspec type="{rspec.variant.value}"/>'.encode()
    body = "\n".join(lines)
    return f'<rspec type="{rspec.variant.value}">\n{body}\n</rspec>'.encode()


# -- decoding ---------------------------------------------------------------


class _El:
    __slots__ = ("tag", "attrs", "children", "line")

    def __init__(self, tag: str, attrs: dict[str, str], line: int):
        self.tag = tag
        self.attrs = attrs
        self.children: list[_El] = []
        self.line = line


def _parse_tree(data: bytes) -> _El:
    parser = xml.parsers.expat.ParserCreate("UTF-8")
    stack: list[_El] = []
    root: list[_El] = []

    def start(tag: str, attrs: dict[str, str]) -> None:
        el = _El(tag, attrs, parser.CurrentLineNumber)
        if stack:
            stack[-1].children.append(el)
        else:
            root.append(el)
        stack.append(el)

    def end(tag: str) -> None:
        stack.pop()

    def chars(text: str) -> None:
        if text.strip():
            raise RspecParseError(parser.CurrentLineNumber, f"unexpected text {text.strip()!r}")

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    try:
        parser.Parse(data, True)
    except xml.parsers.expat.ExpatError as exc:
        raise RspecParseError(exc.lineno or 0, f"malformed xml: {exc}") from None
    if not root:
        raise RspecParseError(0, "empty document")
    return root[0]


def _require(el: _El, name: str) -> str:
    try:
        return el.attrs[name]
    except KeyError:
        raise RspecParseError(el.line, f"<{el.tag}> missing attribute {name!r}") from None


def _parse_bool(el: _El, name: str) -> bool:
    value = _require(el, name)
    if value == "true":
        return True
    if value == "false":
        return False
    raise RspecParseError(el.line, f"{name} must be true or false, got {value!r}")


def _parse_ts(el: _El, name: str) -> datetime:
    value = _require(el, name)
    try:
        return datetime.strptime(value, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    except ValueError:
        raise RspecParseError(el.line, f"bad timestamp {value!r} in {name}") from None


def _parse_node(el: _El) -> Resource:
    component_id = _require(el, "component_id")
    try:
        urn = parse_urn(component_id)
    except MalformedUrn as exc:
        raise RspecParseError(el.line, str(exc)) from None
    name = _require(el, "component_name")
    exclusive = _parse_bool(el, "exclusive")
    resource_type: str | None = None
    latitude = longitude = None
    available: bool | None = None
    for child in el.children:
        if child.tag == "hardware_type":
            resource_type = _require(child, "name")
        elif child.tag == "location":
            try:
                latitude = float(_require(child, "latitude"))
                longitude = float(_require(child, "longitude"))
            except ValueError:
                raise RspecParseError(child.line, "bad coordinate") from None
        elif child.tag == "available":
            available = _parse_bool(child, "now")
        else:
            raise RspecParseError(child.line, f"unknown element <{child.tag}>")
    if resource_type is None:
        raise RspecParseError(el.line, "<node> missing <hardware_type>")
    if available is None:
        raise RspecParseError(el.line, "<node> missing <available>")
    return Resource(
        component_id=urn,
        testbed=":".join(urn.authority),
        name=name,
        resource_type=resource_type,
        exclusive=exclusive,
        available=available,
        latitude=latitude,
        longitude=longitude,
    )


def _parse_lease(el: _El) -> RspecLease:
    start_time = _parse_ts(el, "start_time")
    end_time = _parse_ts(el, "end_time")
    if end_time <= start_time:
        raise RspecParseError(el.line, "lease end_time must follow start_time")
    if (end_time - start_time).total_seconds() < MIN_LEASE_SECONDS:
        raise RspecParseError(el.line, f"lease shorter than {MIN_LEASE_SECONDS}s")
    components: list[str] = []
    for child in el.children:
        if child.tag != "node":
            raise RspecParseError(child.line, f"unknown element <{child.tag}> in lease")
        components.append(_require(child, "component_id"))
    if not components:
        raise RspecParseError(el.line, "lease carries no components")
    return RspecLease(tuple(components), start_time, end_time)


def decode_rspec(data: bytes) -> RSpec:
    root = _parse_tree(data)
    if root.tag != "rspec":
        raise RspecParseError(root.line, f"root must be <rspec>, got <{root.tag}>")
    type_value = _require(root, "type")
    try:
        variant = RspecVariant(type_value)
    except ValueError:
        raise RspecParseError(root.line, f"unknown rspec type {type_value!r}") from None
    nodes: list[Resource] = []
    leases: list[RspecLease] = []
    for child in root.children:
        if child.tag == "node":
            nodes.append(_parse_node(child))
        elif child.tag == "lease":
            leases.append(_parse_lease(child))
        else:
            raise RspecParseError(child.line, f"unknown element <{child.tag}>")
    return RSpec(variant=variant, nodes=tuple(nodes), leases=tuple(leases))
