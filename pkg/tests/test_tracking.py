"""Event log: sequencing, durability, codec, queries, replay, metrics."""

import threading

import pytest

from civicflow.clock import DAY
from civicflow.errors import MalformedEvent, PrivilegeDenied, UnknownInstance
from civicflow.events import EventKind, EventRecord, decode_line, encode_line
from civicflow.identity import PrincipalKind
from civicflow.state import InstanceState, TaskState
from civicflow.tracking import EventLog

from tests.test_engine import start_license, work

VERIFY_OUT = {"applicant_id": "A-17", "license_no": "L-88"}


def run_license(rt):
    instance = start_license(rt)
    work(rt, "alice", VERIFY_OUT)
    work(rt, "grace", VERIFY_OUT)
    work(rt, "amina", {"fee_minor": 20000})
    return instance


# -- the raw log ------------------------------------------------------------------


def test_seq_is_gapless_and_increasing(staffed):
    run_license(staffed)
    seqs = [r.seq for r in staffed.log.records()]
    assert seqs == list(range(1, len(seqs) + 1))


def test_concurrent_appends_get_distinct_consecutive_seqs():
    log = EventLog()
    barrier = threading.Barrier(8)

    def append(i):
        barrier.wait()
        for _ in range(50):
            log.record(EventKind.ALERT, instance=f"wf-{i}", actor="system", at=0.0,
                       payload={"reason": "x"})

    threads = [threading.Thread(target=append, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    seqs = [r.seq for r in log.records()]
    assert seqs == list(range(1, 401))


def test_event_missing_instance_is_malformed():
    log = EventLog()
    with pytest.raises(MalformedEvent):
        log.record(EventKind.ALERT, instance="", actor="system", at=0.0)


def test_task_event_requires_task_id():
    log = EventLog()
    with pytest.raises(MalformedEvent):
        log.record(EventKind.TASK_CLAIMED, instance="wf-1", actor="grace", at=0.0)


def test_records_are_immutable_snapshots(staffed):
    run_license(staffed)
    first = staffed.log.records(since_seq=0)
    second = staffed.log.records(since_seq=0)
    assert first == second


def test_log_file_round_trips(tmp_path):
    path = tmp_path / "events.log"
    log = EventLog(path=path)
    log.record(
        EventKind.INSTANCE_STARTED,
        instance="wf-1",
        actor="alice",
        at=0.0,
        payload={"definition": "d", "version": 1, "var.x": 5},
    )
    log.record(EventKind.TASK_CREATED, instance="wf-1", actor="system", at=1.5,
               task="task-1", payload={"activity": "a", "role": "clerk", "deadline": 90.0})
    log.close()

    reloaded = EventLog(path=path)
    assert reloaded.records() == log.records()
    reloaded.close()


# -- line codec -------------------------------------------------------------------


def test_line_codec_round_trip_preserves_scalar_types():
    record = EventRecord(
        seq=3,
        at=86400.0,
        instance="wf-1",
        actor="grace",
        kind=EventKind.TASK_COMPLETED,
        task="task-9",
        payload={
            "output.name": "A 17 & more",
            "output.fee": 5000,
            "output.ok": True,
            "deadline": 259200.0,
        },
    )
    decoded = decode_line(encode_line(record))
    assert decoded == record
    assert isinstance(decoded.payload["output.fee"], int)
    assert isinstance(decoded.payload["output.ok"], bool)
    assert isinstance(decoded.payload["deadline"], float)


def test_line_format_seq_first_sorted_payload():
    record = EventRecord(
        seq=1, at=0.0, instance="wf-1", actor="system",
        kind=EventKind.ALERT, payload={"zeta": 1, "alpha": 2},
    )
    line = encode_line(record)
    assert line.startswith("seq=1 at=0 instance=wf-1 actor=system kind=alert")
    assert line.index("alpha=") < line.index("zeta=")


def test_unicode_and_spaces_survive_the_wire():
    record = EventRecord(
        seq=1, at=0.5, instance="wf 1", actor="müller",
        kind=EventKind.ALERT, payload={"reason": "jambo sana = karibu"},
    )
    assert decode_line(encode_line(record)) == record


# -- authorized queries ------------------------------------------------------------


def test_citizen_sees_own_instance_events(staffed):
    instance = run_license(staffed)
    records = staffed.tracking.query(caller="alice", instance=instance.id)
    kinds = [r.kind for r in records]
    assert kinds[0] is EventKind.INSTANCE_STARTED
    assert kinds[-1] is EventKind.INSTANCE_COMPLETED


def test_citizen_denied_other_instances(staffed):
    instance = run_license(staffed)
    staffed.identity.register("admin", "bob", "Bob", PrincipalKind.CITIZEN, "pw")
    with pytest.raises(PrivilegeDenied):
        staffed.tracking.query(caller="bob", instance=instance.id)


def test_supervisor_sees_all(staffed):
    instance = run_license(staffed)
    records = staffed.tracking.query(caller="amina", instance=instance.id)
    assert records


def test_unfiltered_query_narrows_to_own_instances(staffed):
    run_license(staffed)
    assert staffed.tracking.query(caller="alice")
    assert staffed.tracking.query(caller="noro") == []


def test_filter_by_kind_finds_single_escalation(staffed):
    instance = start_license(staffed)
    staffed.advance_clock(7 * DAY)  # submit-request escalates (renewals=0)
    records = staffed.tracking.query(
        caller="amina", instance=instance.id, kind=EventKind.TASK_ESCALATED
    )
    assert len(records) == 1


def test_since_seq_filter(staffed):
    instance = run_license(staffed)
    all_records = staffed.tracking.query(caller="amina", instance=instance.id)
    later = staffed.tracking.query(
        caller="amina", instance=instance.id, since_seq=all_records[2].seq
    )
    assert later == all_records[3:]


# -- replay --------------------------------------------------------------------------


def test_replay_full_run_equals_live(staffed):
    instance = run_license(staffed)
    live = staffed.engine.snapshot(instance.id)
    replayed = staffed.tracking.replay(instance.id)
    assert replayed == live
    assert replayed.state is InstanceState.COMPLETED
    assert all(t.state is TaskState.COMPLETED for t in replayed.tasks.values())


def test_replay_partial_run_has_claimed_task(staffed):
    instance = start_license(staffed)
    task_id = staffed.tasks.list_worklist("alice").items[0]
    staffed.tasks.claim(task_id, "alice")
    replayed = staffed.tracking.replay(instance.id)
    assert replayed == staffed.engine.snapshot(instance.id)
    assert replayed.tasks[task_id].state is TaskState.CLAIMED
    assert replayed.tasks[task_id].assignee == "alice"


def test_replay_unknown_instance(staffed):
    with pytest.raises(UnknownInstance):
        staffed.tracking.replay("wf-nope")


def test_replay_after_timers_and_delegation(staffed):
    instance = start_license(staffed)
    work(staffed, "alice", VERIFY_OUT)
    task = staffed.tasks.get(staffed.tasks.list_worklist("grace").items[0])
    staffed.tasks.claim(task.id, "grace")
    staffed.tasks.delegate(task.id, "grace", "daniel")
    staffed.advance_clock(4 * DAY)  # renew then escalate
    assert staffed.tracking.replay(instance.id) == staffed.engine.snapshot(instance.id)


# -- cycle time ----------------------------------------------------------------------


def test_cycle_time_mean_and_max(staffed):
    staffed.deploy_fixture("license_renewal")

    def run_with_delay(delay_seconds):
        staffed.engine.start_instance(
            "license_renewal", {"applicant_id": "A", "license_no": "L"}, "alice"
        )
        task = staffed.tasks.get(staffed.tasks.list_worklist("alice").items[-1])
        staffed.tasks.claim(task.id, "alice")
        staffed.advance_clock(delay_seconds)
        staffed.tasks.complete(task.id, "alice", {"applicant_id": "A", "license_no": "L"})

    run_with_delay(100)
    run_with_delay(300)
    report = staffed.tracking.cycle_time_report("license_renewal")
    stats = report.activities["submit-request"]
    assert stats.count == 2
    assert stats.mean_seconds == 200.0
    assert stats.max_seconds == 300.0
    # verify-documents tasks were created but never finished: excluded
    assert "verify-documents" not in report.activities


def test_cycle_time_empty_without_terminal_tasks(staffed):
    staffed.deploy_fixture("license_renewal")
    report = staffed.tracking.cycle_time_report("license_renewal")
    assert report.activities == {}


def test_open_tasks_excluded_from_count(staffed):
    start_license(staffed)
    report = staffed.tracking.cycle_time_report("license_renewal")
    assert report.activities == {}
