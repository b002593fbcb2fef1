"""Enactment engine: starting, advancing, routing, connectors, termination."""

import pytest

from civicflow.errors import (
    ActivityNotActive,
    ConnectorFailure,
    DuplicateDefinition,
    InvalidDefinition,
    InvalidVariables,
    NoTransitionSatisfied,
    NotRunning,
    PrivilegeDenied,
    UnknownDefinition,
)
from civicflow.events import EventKind
from civicflow.state import InstanceState, TaskState

from tests.conftest import register_cast

MINIMAL = 'process mini v1 "Mini"\nstart\nend\nflow start -> end\n'

CONTRADICTORY = (
    'process stuck v1 "Stuck"\n'
    "input n: int\n"
    "start\n"
    "task fill role=clerk expires=1d escalate=supervisor renewals=0\n"
    "decision pick\n"
    "end\n"
    "end low\n"
    "flow start -> fill\n"
    "flow fill -> pick\n"
    "flow pick -> end when n <= 10\n"
    "flow pick -> low when n <= 5\n"
)

FLAKY = (
    'process flaky v1 "Flaky"\n'
    "start\n"
    "auto call connector=wobbly\n"
    "end\n"
    "flow start -> call\n"
    "flow call -> end\n"
)


class WobblyConnector:
    """Fails a configured number of times, then succeeds."""

    name = "wobbly"

    def __init__(self, failures: int):
        self.failures = failures
        self.calls = 0

    def invoke(self, variables, context):
        self.calls += 1
        if self.calls <= self.failures:
            raise ConnectorFailure("wobble")
        return {}


def start_license(rt, citizen="alice"):
    rt.deploy_fixture("license_renewal")
    return rt.engine.start_instance(
        "license_renewal", {"applicant_id": "A-17", "license_no": "L-88"}, citizen
    )


def work(rt, principal, output):
    worklist = rt.tasks.list_worklist(principal)
    task = rt.tasks.claim(worklist.items[0], principal)
    return rt.tasks.complete(task.id, principal, output)


def test_start_creates_pending_verify_task_for_clerk(staffed):
    instance = start_license(staffed)
    assert instance.state is InstanceState.RUNNING
    assert instance.active == {"submit-request"}
    work(staffed, "alice", {"applicant_id": "A-17", "license_no": "L-88"})
    assert instance.active == {"verify-documents"}
    grace_list = staffed.tasks.list_worklist("grace")
    assert len(grace_list.items) == 1
    task = staffed.tasks.get(grace_list.items[0])
    assert task.state is TaskState.PENDING
    assert task.role == "clerk"
    assert task.input == {"applicant_id": "A-17", "license_no": "L-88"}


def test_start_unknown_definition(staffed):
    with pytest.raises(UnknownDefinition):
        staffed.engine.start_instance("ghost", {}, "alice")


def test_minimal_process_completes_immediately(staffed):
    staffed.deploy(MINIMAL)
    instance = staffed.engine.start_instance("mini", {}, "alice")
    assert instance.state is InstanceState.COMPLETED
    assert instance.active == set()
    assert instance.end_reached


def test_start_variable_validation(staffed):
    staffed.deploy_fixture("license_renewal")
    with pytest.raises(InvalidVariables):
        staffed.engine.start_instance("license_renewal", {}, "alice")
    with pytest.raises(InvalidVariables):
        staffed.engine.start_instance(
            "license_renewal",
            {"applicant_id": "A-17", "license_no": "L-88", "bogus": 1},
            "alice",
        )
    with pytest.raises(InvalidVariables):
        staffed.engine.start_instance(
            "license_renewal", {"applicant_id": 7, "license_no": "L-88"}, "alice"
        )


def test_advance_past_approve_schedules_billing(staffed):
    instance = start_license(staffed)
    work(staffed, "alice", {"applicant_id": "A-17", "license_no": "L-88"})
    work(staffed, "grace", {"applicant_id": "A-17", "license_no": "L-88"})
    # approve is active with an open pending task; direct advance completes it
    # on the system's behalf and billing runs
    staffed.engine.advance(instance.id, "approve", {"fee_minor": 25000})
    assert instance.state is InstanceState.COMPLETED
    assert len(staffed.billing.records) == 1
    billing_events = staffed.log.records(
        instance=instance.id, kind=EventKind.CONNECTOR_INVOKED
    )
    assert [e.payload["connector"] for e in billing_events] == ["laifoms", "notice"]


def test_advance_inactive_activity(staffed):
    instance = start_license(staffed)
    with pytest.raises(ActivityNotActive):
        staffed.engine.advance(instance.id, "approve", {})


def test_decision_with_all_guards_false_parks_instance(staffed):
    staffed.deploy(CONTRADICTORY)
    instance = staffed.engine.start_instance("stuck", {"n": 50}, "alice")
    work(staffed, "grace", {})
    # the decision token is parked; the instance keeps running for repair
    assert instance.state is InstanceState.RUNNING
    assert instance.active == {"pick"}
    alerts = staffed.alerts(instance.id)
    assert any(a.payload["reason"] == "no-transition-satisfied" for a in alerts)
    with pytest.raises(NoTransitionSatisfied):
        staffed.engine.advance(instance.id, "pick")


def test_decision_routes_first_satisfied_in_order(staffed):
    staffed.deploy(CONTRADICTORY)
    instance = staffed.engine.start_instance("stuck", {"n": 3}, "alice")
    work(staffed, "grace", {})
    # n=3 satisfies both guards; the first transition in the file wins
    assert instance.state is InstanceState.COMPLETED
    activated = [
        e.payload["activity"]
        for e in staffed.log.records(instance=instance.id, kind=EventKind.ACTIVITY_ACTIVATED)
    ]
    assert activated[-1] == "end"


def test_connector_retries_then_succeeds(staffed):
    wobbly = WobblyConnector(failures=2)
    staffed.connectors.register(wobbly)
    staffed.deploy(FLAKY)
    instance = staffed.engine.start_instance("flaky", {}, "alice")
    assert instance.state is InstanceState.COMPLETED
    assert wobbly.calls == 3
    failures = staffed.log.records(instance=instance.id, kind=EventKind.CONNECTOR_FAILED)
    assert len(failures) == 2


def test_connector_exhaustion_parks_instance(staffed):
    wobbly = WobblyConnector(failures=99)
    staffed.connectors.register(wobbly)
    staffed.deploy(FLAKY)
    instance = staffed.engine.start_instance("flaky", {}, "alice")
    assert instance.state is InstanceState.RUNNING
    assert instance.active == {"call"}
    assert wobbly.calls == 3
    alerts = staffed.alerts(instance.id)
    assert any(a.payload["reason"] == "connector-failure" for a in alerts)
    # supervisory retry via advance: connector now succeeds
    wobbly.failures = 0
    staffed.engine.advance(instance.id, "call")
    assert instance.state is InstanceState.COMPLETED


def test_advance_rejects_outputs_without_task(staffed):
    staffed.deploy(CONTRADICTORY)
    instance = staffed.engine.start_instance("stuck", {"n": 50}, "alice")
    work(staffed, "grace", {})
    with pytest.raises(InvalidVariables):
        staffed.engine.advance(instance.id, "pick", {"n": 1})


def test_terminate_removes_tasks_from_worklists(staffed):
    instance = start_license(staffed)
    assert len(staffed.tasks.list_worklist("alice").items) == 1
    staffed.engine.terminate(instance.id, "amina", "duplicate request")
    assert instance.state is InstanceState.TERMINATED
    assert staffed.tasks.list_worklist("alice").items == ()
    events = staffed.log.records(instance=instance.id, kind=EventKind.INSTANCE_TERMINATED)
    assert events[0].payload["reason"] == "duplicate request"


def test_terminate_completed_instance_is_not_running(staffed):
    staffed.deploy(MINIMAL)
    instance = staffed.engine.start_instance("mini", {}, "alice")
    with pytest.raises(NotRunning):
        staffed.engine.terminate(instance.id, "amina", "late")


def test_terminate_requires_supervise_privilege(staffed):
    instance = start_license(staffed)
    with pytest.raises(PrivilegeDenied):
        staffed.engine.terminate(instance.id, "grace", "not allowed")


def test_redeploying_same_id_version_is_error(staffed):
    staffed.deploy(MINIMAL)
    with pytest.raises(DuplicateDefinition):
        staffed.deploy(MINIMAL)


def test_deploy_rejects_invalid_definition(staffed):
    bad = 'process bad v1 "Bad"\nstart\ntask t role=r expires=1d escalate=s renewals=0\nend\nflow start -> end\n'
    with pytest.raises(InvalidDefinition):
        staffed.deploy(bad)


def test_token_conservation_through_full_run(staffed):
    instance = start_license(staffed)
    for principal, output in [
        ("alice", {"applicant_id": "A-17", "license_no": "L-88"}),
        ("grace", {"applicant_id": "A-17", "license_no": "L-88"}),
        ("amina", {"fee_minor": 25000}),
    ]:
        assert instance.active, "running instance must always hold a token"
        work(staffed, principal, output)
    assert instance.state is InstanceState.COMPLETED
    assert instance.active == set()


def test_determinism_same_seed_same_event_log():
    from civicflow.runtime import Runtime, RuntimeConfig

    def run():
        runtime = Runtime(RuntimeConfig(test_mode=True, seed=7))
        register_cast(runtime)
        runtime.deploy_fixture("license_renewal")
        runtime.engine.start_instance(
            "license_renewal", {"applicant_id": "A", "license_no": "L"}, "alice"
        )
        worklist = runtime.tasks.list_worklist("alice")
        task = runtime.tasks.claim(worklist.items[0], "alice")
        runtime.tasks.complete(task.id, "alice", {"applicant_id": "A", "license_no": "L"})
        runtime.advance_clock(3600)
        lines = runtime.log.export_lines()
        runtime.close()
        return lines

    assert run() == run()
