"""Timer semantics: expiry boundaries, renewal-then-escalation, tick ordering."""

import pytest

from civicflow.clock import DAY
from civicflow.errors import ClockRegression
from civicflow.events import EventKind
from civicflow.state import TaskState

from tests.test_engine import start_license, work


def verify_task(rt):
    start_license(rt)
    work(rt, "alice", {"applicant_id": "A-17", "license_no": "L-88"})
    return rt.tasks.get(rt.tasks.list_worklist("grace").items[0])


def test_deadline_boundary_fires_exactly_at_deadline(staffed):
    task = verify_task(staffed)  # expires=3d
    assert staffed.advance_clock(3 * DAY - 1) == []
    firings = staffed.advance_clock(1)
    assert [f.task_id for f in firings] == [task.id]
    assert firings[0].action == "renewed"


def test_deadline_fires_exactly_once_regardless_of_tick_granularity(staffed):
    task = verify_task(staffed)
    total = []
    for _ in range(10):
        total += staffed.advance_clock(DAY // 2)
    renewals = [f for f in total if f.task_id == task.id and f.action == "renewed"]
    escalations = [f for f in total if f.task_id == task.id and f.action == "escalated"]
    assert len(renewals) == 1  # policy allows one renewal
    assert len(escalations) == 1  # then exactly one escalation


def test_renewal_then_escalation_narrative(staffed):
    """expires=3d, renewals=1, extend=1d: renew at day 3, escalate at day 4."""
    task = verify_task(staffed)
    staffed.tasks.claim(task.id, "grace")

    firings = staffed.advance_clock(3 * DAY)
    assert [f.action for f in firings] == ["renewed"]
    assert task.state is TaskState.CLAIMED  # renewal keeps state and assignee
    assert task.assignee == "grace"
    assert task.deadline == 4 * DAY
    assert task.renewals_used == 1

    firings = staffed.advance_clock(DAY)
    assert [f.action for f in firings] == ["escalated"]
    assert task.state is TaskState.PENDING
    assert task.assignee is None
    assert task.role == "supervisor"
    assert not task.timer_armed

    # only escalation-role principals see it now
    assert task.id in staffed.tasks.list_worklist("amina").items
    assert task.id not in staffed.tasks.list_worklist("grace").items


def test_zero_renewals_escalates_immediately(staffed):
    start_license(staffed)
    task = staffed.tasks.get(staffed.tasks.list_worklist("alice").items[0])
    # submit-request: expires=7d renewals=0 escalate=clerk
    firings = staffed.advance_clock(7 * DAY)
    assert [f.action for f in firings] == ["escalated"]
    assert task.role == "clerk"


def test_expiry_on_completed_task_never_fires(staffed):
    task = verify_task(staffed)
    staffed.tasks.claim(task.id, "grace")
    staffed.tasks.complete(
        task.id, "grace", {"applicant_id": "A-17", "license_no": "L-88"}
    )
    # past the verify deadline: only the approve task (2d) may fire
    firings = staffed.advance_clock(10 * DAY)
    assert task.id not in [f.task_id for f in firings]


def test_equal_deadlines_fire_in_task_id_order(staffed):
    staffed.deploy(
        'process pair v1 "Pair"\n'
        "start\n"
        "task a role=clerk expires=1d escalate=supervisor renewals=0\n"
        "task b role=clerk expires=1d escalate=supervisor renewals=0\n"
        "end\n"
        "flow start -> a\nflow start -> b\nflow a -> end\nflow b -> end\n"
    )
    staffed.engine.start_instance("pair", {}, "alice")
    firings = staffed.advance_clock(DAY)
    assert len(firings) == 2
    assert [f.task_id for f in firings] == sorted(f.task_id for f in firings)
    assert firings[0].deadline == firings[1].deadline


def test_clock_regression_rejected(staffed):
    staffed.engine.tick(100.0)
    with pytest.raises(ClockRegression):
        staffed.engine.tick(50.0)


def test_coarse_tick_burns_renewal_and_escalates(staffed):
    """One huge tick covers both deadlines: renewal then escalation."""
    task = verify_task(staffed)
    firings = staffed.advance_clock(30 * DAY)
    actions = [f.action for f in firings if f.task_id == task.id]
    assert actions == ["renewed", "escalated"]
    renew_events = staffed.log.records(task=task.id, kind=EventKind.TASK_RENEWED)
    assert len(renew_events) == 1


def test_escalated_task_claimable_by_new_role(staffed):
    task = verify_task(staffed)
    staffed.advance_clock(4 * DAY)  # renew at 3d, escalate at 4d
    assert task.role == "supervisor"
    staffed.tasks.claim(task.id, "amina")
    assert task.assignee == "amina"
