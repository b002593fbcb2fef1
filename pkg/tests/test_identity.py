"""Principals, roles, tokens, and authorization."""

import pytest

from civicflow.clock import SimulatedClock
from civicflow.errors import (
    BadCredentials,
    DuplicateId,
    ExpiredToken,
    PrivilegeDenied,
    UnknownRole,
    UnknownToken,
)
from civicflow.identity import IdentityService, PrincipalKind, Privilege

from tests.test_engine import start_license, work


@pytest.fixture
def identity():
    service = IdentityService(SimulatedClock(), hash_iterations=1000)
    service.bootstrap_admin("admin", "root-secret")
    return service


def test_register_and_retrieve(identity):
    identity.register("admin", "wanjiru", "Wanjiru K", PrincipalKind.OFFICER, "s3cret")
    view = identity.principal("wanjiru").public_view()
    assert view["id"] == "wanjiru"
    assert "secret" not in str(view)
    assert "s3cret" not in str(view)


def test_duplicate_id_rejected(identity):
    identity.register("admin", "x", "X", PrincipalKind.OFFICER, "pw")
    with pytest.raises(DuplicateId):
        identity.register("admin", "x", "X again", PrincipalKind.OFFICER, "pw")


def test_register_requires_manage_users(identity):
    identity.register("admin", "pleb", "Pleb", PrincipalKind.CITIZEN, "pw")
    with pytest.raises(PrivilegeDenied):
        identity.register("pleb", "y", "Y", PrincipalKind.CITIZEN, "pw")


def test_authenticate_and_resolve(identity):
    identity.register("admin", "x", "X", PrincipalKind.OFFICER, "pw")
    token = identity.authenticate("x", "pw")
    assert identity.resolve(token.token) == "x"
    assert len(token.token) == 32  # 128 bits hex


def test_wrong_secret_and_unknown_id_fail_identically(identity):
    identity.register("admin", "x", "X", PrincipalKind.OFFICER, "pw")
    with pytest.raises(BadCredentials) as wrong:
        identity.authenticate("x", "nope")
    with pytest.raises(BadCredentials) as unknown:
        identity.authenticate("who", "nope")
    assert str(wrong.value) == str(unknown.value)


def test_token_expires_after_ttl():
    clock = SimulatedClock()
    service = IdentityService(clock, token_ttl=3600, hash_iterations=1000)
    service.bootstrap_admin("admin", "pw")
    token = service.authenticate("admin", "pw").token
    assert service.resolve(token) == "admin"
    clock.advance(3601)
    with pytest.raises(ExpiredToken):
        service.resolve(token)


def test_unknown_token_rejected(identity):
    with pytest.raises(UnknownToken):
        identity.resolve("feedfacefeedfacefeedfacefeedface")


def test_authorize_checks_privilege_union(identity):
    identity.register("admin", "sup", "Sup", PrincipalKind.OFFICER, "pw")
    identity.assign_role("admin", "sup", "supervisor")
    token = identity.authenticate("sup", "pw").token
    assert identity.authorize(token, Privilege.SUPERVISE) == "sup"
    with pytest.raises(PrivilegeDenied):
        identity.authorize(token, Privilege.DEPLOY_DEFINITION)


def test_assign_unknown_role(identity):
    identity.register("admin", "x", "X", PrincipalKind.OFFICER, "pw")
    with pytest.raises(UnknownRole):
        identity.assign_role("admin", "x", "astronaut")


def test_privilege_monotonicity(identity):
    identity.register("admin", "x", "X", PrincipalKind.OFFICER, "pw")
    identity.assign_role("admin", "x", "citizen")
    before = {p for p in Privilege if identity.has_privilege("x", p)}
    identity.assign_role("admin", "x", "supervisor")
    after = {p for p in Privilege if identity.has_privilege("x", p)}
    assert before <= after
    identity.revoke_role("admin", "x", "supervisor")
    final = {p for p in Privilege if identity.has_privilege("x", p)}
    assert final == before


def test_assigning_role_changes_worklist(staffed):
    start_license(staffed)
    work(staffed, "alice", {"applicant_id": "A-17", "license_no": "L-88"})
    assert staffed.tasks.list_worklist("noro").items == ()
    staffed.identity.assign_role("admin", "noro", "clerk")
    assert len(staffed.tasks.list_worklist("noro").items) == 1


def test_revoking_role_blocks_claim(staffed):
    from civicflow.errors import RoleMismatch

    start_license(staffed)
    work(staffed, "alice", {"applicant_id": "A-17", "license_no": "L-88"})
    task_id = staffed.tasks.list_worklist("grace").items[0]
    staffed.identity.revoke_role("admin", "grace", "clerk")
    with pytest.raises(RoleMismatch):
        staffed.tasks.claim(task_id, "grace")


def test_no_secret_material_in_event_log(staffed):
    start_license(staffed, citizen="alice")
    log_text = "\n".join(staffed.log.export_lines())
    assert "pw" not in log_text.split()  # the cast's secret
    assert "change-me" not in log_text
