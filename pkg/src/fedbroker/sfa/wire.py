"""Marshalling between domain values and XML-RPC structs.

Credentials travel as base64 of their canonical bytes in a string
parameter; records as flat structs with empty strings for absent
fields, so no endpoint needs non-standard nil extensions.
"""

from __future__ import annotations

import base64

from ..model import Record, RecordType, parse_hrn


def record_to_struct(record: Record) -> dict:
    return {
        "hrn": record.hrn.render(),
        "type": record.type.value,
        "email": record.email or "",
        "members": list(record.members),
        "public_key": base64.b64encode(record.public_key).decode("ascii")
        if record.public_key
        else "",
        "created_at": record.created_at or "",
        "updated_at": record.updated_at or "",
    }


def struct_to_record(raw: dict) -> Record:
    return Record(
        hrn=parse_hrn(raw["hrn"]),
        type=RecordType(raw["type"]),
        email=raw.get("email") or None,
        members=tuple(raw.get("members") or ()),
        public_key=base64.b64decode(raw["public_key"]) if raw.get("public_key") else None,
        created_at=raw.get("created_at") or None,
        updated_at=raw.get("updated_at") or None,
    )
