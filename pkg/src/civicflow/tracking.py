"""Append-only event log with filtered queries, replay, and cycle-time metrics.

The log is the audit backbone: appends are linearized behind one lock and
assign gap-free sequence numbers; an optional file sink makes the log durable
as newline-delimited records (see :mod:`civicflow.events` for the line
format).  Observers are notified after each append, which is how notification
dispatch hangs off the log.
"""

from __future__ import annotations

import statistics
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from civicflow.errors import MalformedEvent, PrivilegeDenied, UnknownInstance
from civicflow.events import (
    EventKind,
    EventRecord,
    Scalar,
    decode_line,
    encode_line,
    unflatten,
)
from civicflow.state import (
    HistoryEntry,
    InstanceSnapshot,
    InstanceState,
    TaskSnapshot,
    TaskState,
)


class EventLog:
    """Durable, strictly-sequenced append-only store of EventRecords."""

    def __init__(self, path: str | Path | None = None):
        self._lock = threading.Lock()
        self._records: list[EventRecord] = []
        self._by_instance: dict[str, list[EventRecord]] = {}
        self._observers: list[Callable[[EventRecord], None]] = []
        self._path = Path(path) if path else None
        self._sink = None
        if self._path:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            if self._path.exists():
                for line in self._path.read_text(encoding="utf-8").splitlines():
                    if line.strip():
                        self._index(decode_line(line))
            self._sink = self._path.open("a", encoding="utf-8")

    def _index(self, record: EventRecord) -> None:
        self._records.append(record)
        self._by_instance.setdefault(record.instance, []).append(record)

    def add_observer(self, callback: Callable[[EventRecord], None]) -> None:
        self._observers.append(callback)

    def record(
        self,
        kind: EventKind,
        instance: str,
        actor: str,
        at: float,
        task: str | None = None,
        payload: dict[str, Scalar] | None = None,
    ) -> EventRecord:
        """Append one event; seq is assigned here, strictly increasing, no gaps."""
        with self._lock:
            record = EventRecord(
                seq=len(self._records) + 1,
                at=at,
                instance=instance,
                actor=actor,
                kind=kind,
                task=task,
                payload=dict(payload or {}),
            )
            record.check()
            self._index(record)
            if self._sink:
                self._sink.write(encode_line(record) + "\n")
                self._sink.flush()
        for observer in self._observers:
            observer(record)
        return record

    def records(
        self,
        instance: str | None = None,
        task: str | None = None,
        actor: str | None = None,
        kind: EventKind | None = None,
        since_seq: int | None = None,
    ) -> list[EventRecord]:
        """Matching records in seq order."""
        with self._lock:
            base = list(self._by_instance.get(instance, ())) if instance else list(self._records)
        out = []
        for record in base:
            if task is not None and record.task != task:
                continue
            if actor is not None and record.actor != actor:
                continue
            if kind is not None and record.kind != kind:
                continue
            if since_seq is not None and record.seq <= since_seq:
                continue
            out.append(record)
        return out

    def last_seq(self) -> int:
        with self._lock:
            return len(self._records)

    def instances(self) -> list[str]:
        with self._lock:
            return list(self._by_instance)

    def export_lines(self, instance: str | None = None) -> list[str]:
        return [encode_line(r) for r in self.records(instance=instance)]

    def close(self) -> None:
        if self._sink:
            self._sink.close()
            self._sink = None


@dataclass(frozen=True)
class ActivityCycleStats:
    count: int
    mean_seconds: float
    max_seconds: float


@dataclass(frozen=True)
class CycleTimeReport:
    definition_id: str
    activities: dict[str, ActivityCycleStats] = field(default_factory=dict)


class TrackingService:
    """Authorized query surface plus replay and metrics over the raw log."""

    def __init__(self, log: EventLog, visibility: "VisibilityPolicy | None" = None):
        self.log = log
        self._visibility = visibility

    def record(self, *args, **kwargs) -> EventRecord:
        return self.log.record(*args, **kwargs)

    def query(
        self,
        caller: str | None = None,
        instance: str | None = None,
        task: str | None = None,
        actor: str | None = None,
        kind: EventKind | None = None,
        since_seq: int | None = None,
    ) -> list[EventRecord]:
        """Matching records in seq order; callers see only what they may."""
        records = self.log.records(
            instance=instance, task=task, actor=actor, kind=kind, since_seq=since_seq
        )
        if caller is None or self._visibility is None or self._visibility.sees_all(caller):
            return records
        if instance is not None:
            if self.initiator_of(instance) != caller:
                raise PrivilegeDenied(f"{caller} may not view events of instance {instance}")
            return records
        initiators: dict[str, str | None] = {}
        visible = []
        for record in records:
            if record.instance not in initiators:
                initiators[record.instance] = self.initiator_of(record.instance)
            if initiators[record.instance] == caller:
                visible.append(record)
        return visible

    def initiator_of(self, instance: str) -> str | None:
        for record in self.log.records(instance=instance, kind=EventKind.INSTANCE_STARTED):
            return record.actor
        return None

    def replay(self, instance_id: str) -> InstanceSnapshot:
        """Fold all events of one instance into its reconstructed state."""
        records = self.log.records(instance=instance_id)
        if not records:
            raise UnknownInstance(f"no events for instance {instance_id!r}")
        return fold_events(records)

    def cycle_time_report(self, definition_id: str) -> CycleTimeReport:
        """Per-activity count/mean/max of task-created -> terminal-task durations."""
        created: dict[str, tuple[str, float]] = {}
        durations: dict[str, list[float]] = {}
        instance_defs: dict[str, str] = {}
        for record in self.log.records():
            if record.kind is EventKind.INSTANCE_STARTED:
                instance_defs[record.instance] = str(record.payload.get("definition", ""))
            elif record.kind is EventKind.TASK_CREATED:
                if instance_defs.get(record.instance) == definition_id:
                    created[record.task] = (str(record.payload["activity"]), record.at)
            elif record.kind in (EventKind.TASK_COMPLETED, EventKind.TASK_FAILED):
                if record.task in created:
                    activity, started_at = created.pop(record.task)
                    durations.setdefault(activity, []).append(record.at - started_at)
        stats = {
            activity: ActivityCycleStats(
                count=len(values),
                mean_seconds=statistics.fmean(values),
                max_seconds=max(values),
            )
            for activity, values in durations.items()
        }
        return CycleTimeReport(definition_id=definition_id, activities=stats)


class VisibilityPolicy:
    """Who may read the whole log; everyone else sees only own instances."""

    def __init__(self, sees_all: Callable[[str], bool]):
        self._sees_all = sees_all

    def sees_all(self, caller: str) -> bool:
        return self._sees_all(caller)


def fold_events(records: Iterable[EventRecord]) -> InstanceSnapshot:
    """Reconstruct instance and task state purely from an ordered event list."""
    snapshot: InstanceSnapshot | None = None
    active: set[str] = set()
    for record in records:
        kind = record.kind
        if kind is EventKind.INSTANCE_STARTED:
            snapshot = InstanceSnapshot(
                id=record.instance,
                definition=(
                    str(record.payload["definition"]),
                    int(record.payload["version"]),
                ),
                state=InstanceState.RUNNING,
                variables=unflatten("var", record.payload),
                active=frozenset(),
                created_at=record.at,
                closed_at=None,
                initiator=record.actor,
                end_reached=False,
            )
            continue
        if snapshot is None:
            raise MalformedEvent(f"event seq={record.seq} precedes instance-started")
        if kind is EventKind.ACTIVITY_ACTIVATED:
            via = str(record.payload.get("via", ""))
            active.discard(via)
            if str(record.payload["activity_kind"]) == "end":
                snapshot.end_reached = True
            else:
                active.add(str(record.payload["activity"]))
        elif kind is EventKind.TASK_CREATED:
            snapshot.tasks[record.task] = TaskSnapshot(
                id=record.task,
                instance=record.instance,
                activity=str(record.payload["activity"]),
                state=TaskState.PENDING,
                role=str(record.payload["role"]),
                assignee=None,
                input=unflatten("input", record.payload),
                output=None,
                fault=None,
                deadline=float(record.payload["deadline"]),
                renewals_used=0,
                timer_armed=True,
                history=(HistoryEntry(record.at, record.actor, "created"),),
            )
        elif kind in (
            EventKind.TASK_CLAIMED,
            EventKind.TASK_COMPLETED,
            EventKind.TASK_FAILED,
            EventKind.TASK_DELEGATED,
            EventKind.TASK_RENEWED,
            EventKind.TASK_ESCALATED,
        ):
            task = snapshot.tasks[record.task]
            action = kind.value.removeprefix("task-")
            task.history = task.history + (HistoryEntry(record.at, record.actor, action),)
            if kind is EventKind.TASK_CLAIMED:
                task.state = TaskState.CLAIMED
                task.assignee = record.actor
            elif kind is EventKind.TASK_COMPLETED:
                task.state = TaskState.COMPLETED
                task.output = unflatten("output", record.payload)
                snapshot.variables.update(task.output)
            elif kind is EventKind.TASK_FAILED:
                task.state = TaskState.FAILED
                task.fault = str(record.payload["fault"])
            elif kind is EventKind.TASK_DELEGATED:
                task.assignee = str(record.payload["to"])
            elif kind is EventKind.TASK_RENEWED:
                task.deadline = float(record.payload["deadline"])
                task.renewals_used = int(record.payload["renewals_used"])
            elif kind is EventKind.TASK_ESCALATED:
                task.role = str(record.payload["role"])
                task.assignee = None
                task.state = TaskState.PENDING
                task.timer_armed = False
        elif kind is EventKind.INSTANCE_COMPLETED:
            snapshot.state = InstanceState.COMPLETED
            snapshot.closed_at = record.at
        elif kind is EventKind.INSTANCE_TERMINATED:
            snapshot.state = InstanceState.TERMINATED
            snapshot.closed_at = record.at
        # connector-invoked, connector-failed and alert events carry no
        # instance/task state: connector outputs live in the log, not in
        # instance variables.
    if snapshot is None:
        raise MalformedEvent("no instance-started event in stream")
    snapshot.active = frozenset(active)
    return snapshot
