"""Credential issue/verify tests, including the byte-flip rejection suite."""

from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedbroker.model import (
    Credential,
    CredentialError,
    Expired,
    MalformedCredential,
    Privilege,
    PrivilegeEscalation,
    RecordType,
    UntrustedRoot,
    credential_from_base64,
    credential_to_base64,
    decode_credential,
    encode_credential,
    generate_keypair,
    issue_credential,
    parse_hrn,
    verify_credential,
)

NOW = datetime(2026, 1, 1, tzinfo=timezone.utc)
ROOT = parse_hrn("onelab")


@pytest.fixture(scope="module")
def root_key():
    return generate_keypair()


def issue_chain(root_key, privileges=frozenset({Privilege.resolve, Privilege.register})):
    """Three-link chain: root issues to an authority, the authority to a
    user, the user delegates to a colleague."""
    root_priv, root_pub = root_key
    authority_priv, authority_pub = generate_keypair()
    user_priv, user_pub = generate_keypair()
    authority_cred = issue_credential(
        root_priv,
        subject=parse_hrn("onelab.upmc"),
        object=parse_hrn("onelab.upmc"),
        object_type=RecordType.authority,
        privileges=privileges,
        ttl_seconds=86400,
        issuer=ROOT,
        subject_key=authority_pub,
        now=NOW,
    )
    user_cred = issue_credential(
        authority_priv,
        subject=parse_hrn("onelab.upmc.alice"),
        object=parse_hrn("onelab.upmc"),
        object_type=RecordType.authority,
        privileges=privileges,
        ttl_seconds=43200,
        parent=authority_cred,
        issuer=parse_hrn("onelab.upmc"),
        subject_key=user_pub,
        now=NOW,
    )
    delegated = issue_credential(
        user_priv,
        subject=parse_hrn("onelab.upmc.bob"),
        object=parse_hrn("onelab.upmc"),
        object_type=RecordType.authority,
        privileges=privileges,
        ttl_seconds=3600,
        parent=user_cred,
        issuer=parse_hrn("onelab.upmc.alice"),
        subject_key=generate_keypair()[1],
        now=NOW,
    )
    return delegated, root_pub


def test_sign_then_verify_round_trip(root_key):
    root_priv, root_pub = root_key
    cred = issue_credential(
        root_priv,
        subject=parse_hrn("onelab.upmc.alice"),
        object=parse_hrn("onelab.upmc"),
        object_type=RecordType.authority,
        privileges={Privilege.resolve, Privilege.register},
        ttl_seconds=86400,
        issuer=ROOT,
        now=NOW,
    )
    assert verify_credential(cred, root_pub, now=NOW + timedelta(hours=1)) == frozenset(
        {Privilege.resolve, Privilege.register}
    )


def test_issue_rejects_privilege_escalation(root_key):
    root_priv, root_pub = root_key
    parent = issue_credential(
        root_priv,
        subject=parse_hrn("onelab.upmc.alice"),
        object=parse_hrn("onelab.upmc.p1"),
        object_type=RecordType.project,
        privileges={Privilege.resolve},
        ttl_seconds=86400,
        issuer=ROOT,
        subject_key=generate_keypair()[1],
        now=NOW,
    )
    delegate_priv, _ = generate_keypair()
    with pytest.raises(PrivilegeEscalation):
        issue_credential(
            delegate_priv,
            subject=parse_hrn("onelab.upmc.bob"),
            object=parse_hrn("onelab.upmc.p1"),
            object_type=RecordType.project,
            privileges={Privilege.allocate},
            ttl_seconds=3600,
            parent=parent,
            issuer=parse_hrn("onelab.upmc.alice"),
            now=NOW,
        )


def test_expiry_boundary_is_exclusive(root_key):
    root_priv, root_pub = root_key
    cred = issue_credential(
        root_priv,
        subject=parse_hrn("onelab.upmc.alice"),
        object=parse_hrn("onelab.upmc"),
        object_type=RecordType.authority,
        privileges={Privilege.resolve},
        ttl_seconds=3600,
        issuer=ROOT,
        now=NOW,
    )
    with pytest.raises(Expired) as exc:
        verify_credential(cred, root_pub, now=cred.expires_at)
    assert exc.value.link == 0
    # One second earlier it is still valid.
    verify_credential(cred, root_pub, now=cred.expires_at - timedelta(seconds=1))


def test_chain_of_depth_three_verifies(root_key):
    cred, root_pub = issue_chain(root_key)
    assert len(cred.chain()) == 3
    effective = verify_credential(cred, root_pub, now=NOW + timedelta(minutes=5))
    assert effective == frozenset({Privilege.resolve, Privilege.register})


def test_every_flipped_byte_rejected(root_key):
    """Flipping any byte of any link's signed content or signature must
    cause rejection: the 100%-rejection soundness oracle."""
    cred, root_pub = issue_chain(root_key)
    wire = encode_credential(cred)
    check_at = NOW + timedelta(minutes=5)
    rejected = 0
    for i in range(len(wire)):
        mutated = bytearray(wire)
        mutated[i] ^= 0x01
        try:
            tampered = decode_credential(bytes(mutated))
        except MalformedCredential:
            rejected += 1
            continue
        try:
            verify_credential(tampered, root_pub, now=check_at)
        except CredentialError:
            rejected += 1
    assert rejected == len(wire)


def test_wrong_root_key_is_untrusted(root_key):
    cred, _ = issue_chain(root_key)
    _, other_pub = generate_keypair()
    with pytest.raises(UntrustedRoot):
        verify_credential(cred, other_pub, now=NOW + timedelta(minutes=5))


def test_rebuilt_chain_under_other_root_rejected_by_original(root_key):
    _, root_pub = root_key
    other_root = generate_keypair()
    cred, other_pub = issue_chain(other_root)
    with pytest.raises(UntrustedRoot):
        verify_credential(cred, root_pub, now=NOW + timedelta(minutes=5))
    verify_credential(cred, other_pub, now=NOW + timedelta(minutes=5))


def test_handcrafted_escalating_link_rejected(root_key):
    """A link that claims more than its parent grants is rejected even
    when its signature is internally consistent."""
    from dataclasses import replace

    root_priv, root_pub = root_key
    from fedbroker.model.credentials import signing_bytes

    authority_priv, authority_pub = generate_keypair()
    parent = issue_credential(
        root_priv,
        subject=parse_hrn("onelab.upmc"),
        object=parse_hrn("onelab.upmc"),
        object_type=RecordType.authority,
        privileges={Privilege.resolve},
        ttl_seconds=86400,
        issuer=ROOT,
        subject_key=authority_pub,
        now=NOW,
    )
    child = Credential(
        subject=parse_hrn("onelab.upmc.eve"),
        object=parse_hrn("onelab.upmc"),
        object_type=RecordType.authority,
        privileges=frozenset({Privilege.resolve, Privilege.allocate}),
        expires_at=NOW + timedelta(hours=1),
        issuer=parse_hrn("onelab.upmc"),
        subject_key=generate_keypair()[1],
        parent=parent,
    )
    child = replace(child, signature=authority_priv.sign(signing_bytes(child)))
    with pytest.raises(PrivilegeEscalation) as exc:
        verify_credential(child, root_pub, now=NOW + timedelta(minutes=5))
    assert exc.value.link == 0


privilege_subsets = st.sets(st.sampled_from(list(Privilege)), min_size=1).map(frozenset)


@settings(max_examples=30, deadline=None)
@given(outer=privilege_subsets, data=st.data())
def test_effective_privileges_are_chain_intersection(outer, data):
    """Over 3-link chains with nested random subsets, the verified
    privilege set equals the intersection of all link sets."""
    mid = data.draw(st.sets(st.sampled_from(sorted(outer)), min_size=1).map(frozenset))
    leaf = data.draw(st.sets(st.sampled_from(sorted(mid)), min_size=1).map(frozenset))
    root_priv, root_pub = generate_keypair()
    mid_priv, mid_pub = generate_keypair()
    leaf_priv, leaf_pub = generate_keypair()
    link0 = issue_credential(
        root_priv,
        subject=parse_hrn("onelab.a"),
        object=parse_hrn("onelab.a"),
        object_type=RecordType.authority,
        privileges=outer,
        ttl_seconds=86400,
        issuer=ROOT,
        subject_key=mid_pub,
        now=NOW,
    )
    link1 = issue_credential(
        mid_priv,
        subject=parse_hrn("onelab.a.b"),
        object=parse_hrn("onelab.a"),
        object_type=RecordType.authority,
        privileges=mid,
        ttl_seconds=43200,
        parent=link0,
        issuer=parse_hrn("onelab.a"),
        subject_key=leaf_pub,
        now=NOW,
    )
    link2 = issue_credential(
        leaf_priv,
        subject=parse_hrn("onelab.a.b.c"),
        object=parse_hrn("onelab.a"),
        object_type=RecordType.authority,
        privileges=leaf,
        ttl_seconds=3600,
        parent=link1,
        issuer=parse_hrn("onelab.a.b"),
        now=NOW,
    )
    effective = verify_credential(link2, root_pub, now=NOW + timedelta(minutes=1))
    assert effective == outer & mid & leaf == leaf


def test_wire_round_trip(root_key):
    cred, _ = issue_chain(root_key)
    assert credential_from_base64(credential_to_base64(cred)) == cred
    assert decode_credential(encode_credential(cred)) == cred


def test_unknown_privilege_string_is_parse_error(root_key):
    cred, _ = issue_chain(root_key)
    wire = encode_credential(cred)
    # Splice an invalid privilege name into the privileges field.
    target = b"register,resolve"
    assert target in wire
    mutated = wire.replace(target, b"register,resolvX")
    with pytest.raises((MalformedCredential, CredentialError)):
        decoded = decode_credential(mutated)
        verify_credential(decoded, root_key[1])
