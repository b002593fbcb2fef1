"""Human-task lifecycle and per-principal worklists.

The state machine is small and strict:

    pending:  claim -> claimed; expiry -> renew (stay pending) or escalate
              (pending again under the escalation role); everything else errors.
    claimed:  complete -> completed; fail -> failed; delegate -> claimed with
              a new assignee; expiry -> renew or escalate; claim errors.
    completed / failed: terminal; every action errors and no timer fires.

All mutations on one task are linearized under its instance's lock, so
concurrent claims have exactly one winner.  Every transition appends exactly
one tracking event.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

from civicflow.clock import Clock
from civicflow.errors import (
    IneligibleDelegate,
    InvalidOutput,
    NotAssignee,
    NotClaimed,
    NotPending,
    RenewalsExhausted,
    RoleMismatch,
    TerminalState,
    Unauthenticated,
    UnknownTask,
)
from civicflow.events import EventKind, Scalar, flatten
from civicflow.ids import IdSource
from civicflow.model.types import ActivityDef, TimerPolicy
from civicflow.state import (
    TERMINAL_TASK_STATES,
    HistoryEntry,
    TaskSnapshot,
    TaskState,
)
from civicflow.tracking import EventLog

logger = logging.getLogger(__name__)


@dataclass
class Task:
    id: str
    instance: str
    activity: str
    state: TaskState
    role: str
    policy: TimerPolicy
    form: tuple[str, ...]
    input: dict[str, Scalar]
    deadline: float
    assignee: str | None = None
    output: dict[str, Scalar] | None = None
    fault: str | None = None
    renewals_used: int = 0
    timer_armed: bool = True
    history: list[HistoryEntry] = field(default_factory=list)

    def snapshot(self) -> TaskSnapshot:
        return TaskSnapshot(
            id=self.id,
            instance=self.instance,
            activity=self.activity,
            state=self.state,
            role=self.role,
            assignee=self.assignee,
            input=dict(self.input),
            output=dict(self.output) if self.output is not None else None,
            fault=self.fault,
            deadline=self.deadline,
            renewals_used=self.renewals_used,
            timer_armed=self.timer_armed,
            history=tuple(self.history),
        )


@dataclass(frozen=True)
class Worklist:
    owner: str
    items: tuple[str, ...]


class TaskService:
    """Owns tasks and worklists; engine binding drives advancement on completion."""

    def __init__(
        self,
        log: EventLog,
        clock: Clock,
        ids: IdSource,
        roles_of: Callable[[str], set[str]],
        principal_exists: Callable[[str], bool],
    ):
        self._log = log
        self._clock = clock
        self._ids = ids
        self._roles_of = roles_of
        self._principal_exists = principal_exists
        self._tasks: dict[str, Task] = {}
        self._by_instance: dict[str, list[str]] = {}
        self._engine = None

    def bind_engine(self, engine) -> None:
        self._engine = engine

    # -- creation (engine-driven, instance lock already held) ----------------

    def create_task(
        self,
        instance_id: str,
        activity: ActivityDef,
        variables: dict[str, Scalar],
        at: float,
    ) -> Task:
        assert activity.timer is not None and activity.role is not None
        task = Task(
            id=self._ids.new("task"),
            instance=instance_id,
            activity=activity.id,
            state=TaskState.PENDING,
            role=activity.role,
            policy=activity.timer,
            form=activity.form,
            input={f: variables[f] for f in activity.form if f in variables},
            deadline=at + activity.timer.expires_after,
        )
        task.history.append(HistoryEntry(at, "system", "created"))
        self._tasks[task.id] = task
        self._by_instance.setdefault(instance_id, []).append(task.id)
        self._log.record(
            EventKind.TASK_CREATED,
            instance=instance_id,
            actor="system",
            at=at,
            task=task.id,
            payload={
                "activity": activity.id,
                "role": task.role,
                "deadline": task.deadline,
                **flatten("input", task.input),
            },
        )
        return task

    # -- lookups --------------------------------------------------------------

    def get(self, task_id: str) -> Task:
        task = self._tasks.get(task_id)
        if task is None:
            raise UnknownTask(f"task {task_id!r} not found")
        return task

    def tasks_of_instance(self, instance_id: str) -> list[Task]:
        return [self._tasks[t] for t in self._by_instance.get(instance_id, ())]

    def open_task_for_activity(self, instance_id: str, activity_id: str) -> Task | None:
        for task in self.tasks_of_instance(instance_id):
            if task.activity == activity_id and task.state not in TERMINAL_TASK_STATES:
                return task
        return None

    def snapshots_of_instance(self, instance_id: str) -> dict[str, TaskSnapshot]:
        return {t.id: t.snapshot() for t in self.tasks_of_instance(instance_id)}

    # -- worklists -------------------------------------------------------------

    def list_worklist(self, principal: str) -> Worklist:
        """Role-eligible pending tasks plus own claimed tasks, deadline order."""
        if not self._principal_exists(principal):
            raise Unauthenticated(f"unknown principal {principal!r}")
        roles = self._roles_of(principal)
        visible: list[Task] = []
        for task in self._tasks.values():
            if not self._engine.is_running(task.instance):
                continue
            if task.state is TaskState.PENDING and task.role in roles:
                visible.append(task)
            elif task.state is TaskState.CLAIMED and task.assignee == principal:
                visible.append(task)
        visible.sort(key=lambda t: (t.deadline, t.id))
        return Worklist(owner=principal, items=tuple(t.id for t in visible))

    # -- lifecycle actions -------------------------------------------------------

    def claim(self, task_id: str, principal: str) -> Task:
        """Atomically claim a pending task; exactly one concurrent caller wins."""
        if not self._principal_exists(principal):
            raise Unauthenticated(f"unknown principal {principal!r}")
        task = self.get(task_id)
        with self._engine.instance_lock(task.instance):
            if not self._engine.is_running(task.instance):
                raise NotPending(f"task {task_id} belongs to a closed instance")
            if task.state is not TaskState.PENDING:
                raise NotPending(f"task {task_id} is {task.state.value}")
            if task.role not in self._roles_of(principal):
                raise RoleMismatch(f"{principal!r} does not hold role {task.role!r}")
            at = self._clock.now()
            task.state = TaskState.CLAIMED
            task.assignee = principal
            task.history.append(HistoryEntry(at, principal, "claimed"))
            self._log.record(
                EventKind.TASK_CLAIMED,
                instance=task.instance,
                actor=principal,
                at=at,
                task=task.id,
            )
            return task

    def complete(self, task_id: str, principal: str, output: dict[str, Scalar]) -> Task:
        """Finish a claimed task with its output data; the engine advances."""
        if not self._principal_exists(principal):
            raise Unauthenticated(f"unknown principal {principal!r}")
        task = self.get(task_id)
        with self._engine.instance_lock(task.instance):
            self._require_claimed_by(task, principal)
            self._engine.check_task_output(task.instance, task.form, output)
            at = self._clock.now()
            task.state = TaskState.COMPLETED
            task.output = dict(output)
            task.history.append(HistoryEntry(at, principal, "completed"))
            self._log.record(
                EventKind.TASK_COMPLETED,
                instance=task.instance,
                actor=principal,
                at=at,
                task=task.id,
                payload=flatten("output", task.output),
            )
            self._engine.on_task_completed(task.instance, task.activity, task.output)
            return task

    def fail(self, task_id: str, principal: str, fault: str) -> Task:
        """Finish a claimed task with a fault; the instance parks for a supervisor."""
        if not self._principal_exists(principal):
            raise Unauthenticated(f"unknown principal {principal!r}")
        task = self.get(task_id)
        with self._engine.instance_lock(task.instance):
            self._require_claimed_by(task, principal)
            at = self._clock.now()
            task.state = TaskState.FAILED
            task.fault = fault
            task.history.append(HistoryEntry(at, principal, "failed"))
            self._log.record(
                EventKind.TASK_FAILED,
                instance=task.instance,
                actor=principal,
                at=at,
                task=task.id,
                payload={"fault": fault},
            )
            self._engine.on_task_failed(task.instance, task.activity, task.id, fault)
            return task

    def delegate(self, task_id: str, from_principal: str, to_principal: str) -> Task:
        """Hand a claimed task to another eligible person; deadline unchanged."""
        if not self._principal_exists(from_principal):
            raise Unauthenticated(f"unknown principal {from_principal!r}")
        task = self.get(task_id)
        with self._engine.instance_lock(task.instance):
            self._require_claimed_by(task, from_principal)
            if not self._principal_exists(to_principal):
                raise IneligibleDelegate(f"unknown principal {to_principal!r}")
            eligible = {task.role, task.policy.escalate_to}
            if not (self._roles_of(to_principal) & eligible):
                raise IneligibleDelegate(
                    f"{to_principal!r} holds neither {task.role!r} nor {task.policy.escalate_to!r}"
                )
            at = self._clock.now()
            previous = task.assignee
            task.assignee = to_principal
            task.history.append(HistoryEntry(at, from_principal, "delegated"))
            self._log.record(
                EventKind.TASK_DELEGATED,
                instance=task.instance,
                actor=from_principal,
                at=at,
                task=task.id,
                payload={"from": previous or "", "to": to_principal},
            )
            return task

    def renew(self, task_id: str, principal: str) -> Task:
        """Voluntarily consume one renewal to push the deadline out."""
        if not self._principal_exists(principal):
            raise Unauthenticated(f"unknown principal {principal!r}")
        task = self.get(task_id)
        with self._engine.instance_lock(task.instance):
            if task.state in TERMINAL_TASK_STATES:
                raise TerminalState(f"task {task_id} is {task.state.value}")
            if not self._engine.is_running(task.instance):
                raise NotPending(f"task {task_id} belongs to a closed instance")
            if task.state is TaskState.CLAIMED:
                if task.assignee != principal:
                    raise NotAssignee(f"task {task_id} is claimed by {task.assignee!r}")
            elif task.role not in self._roles_of(principal):
                raise RoleMismatch(f"{principal!r} does not hold role {task.role!r}")
            if task.renewals_used >= task.policy.max_renewals:
                raise RenewalsExhausted(f"task {task_id} has no renewals left")
            self._renew(task, self._clock.now(), actor=principal)
            return task

    def system_complete(self, task_id: str, output: dict[str, Scalar]) -> Task:
        """Engine-driven completion via advance(); instance lock already held."""
        task = self.get(task_id)
        at = self._clock.now()
        task.state = TaskState.COMPLETED
        task.output = dict(output)
        task.history.append(HistoryEntry(at, "system", "completed"))
        self._log.record(
            EventKind.TASK_COMPLETED,
            instance=task.instance,
            actor="system",
            at=at,
            task=task.id,
            payload=flatten("output", task.output),
        )
        return task

    def on_expiry(self, task_id: str, at: float) -> Task:
        """Timer firing: renew while renewals remain, then escalate."""
        task = self.get(task_id)
        with self._engine.instance_lock(task.instance):
            if task.state in TERMINAL_TASK_STATES:
                raise TerminalState(f"task {task_id} is {task.state.value}")
            if task.renewals_used < task.policy.max_renewals:
                self._renew(task, at, actor="system")
            else:
                self._escalate(task, at)
            return task

    # -- internals ------------------------------------------------------------

    def _require_claimed_by(self, task: Task, principal: str) -> None:
        if not self._engine.is_running(task.instance):
            raise NotClaimed(f"task {task.id} belongs to a closed instance")
        if task.state is not TaskState.CLAIMED:
            raise NotClaimed(f"task {task.id} is {task.state.value}")
        if task.assignee != principal:
            raise NotAssignee(f"task {task.id} is claimed by {task.assignee!r}")

    def _renew(self, task: Task, at: float, actor: str) -> None:
        task.deadline = task.deadline + task.policy.renewal_extension
        task.renewals_used += 1
        task.history.append(HistoryEntry(at, actor, "renewed"))
        self._log.record(
            EventKind.TASK_RENEWED,
            instance=task.instance,
            actor=actor,
            at=at,
            task=task.id,
            payload={"deadline": task.deadline, "renewals_used": task.renewals_used},
        )

    def _escalate(self, task: Task, at: float) -> None:
        former = task.assignee
        task.role = task.policy.escalate_to
        task.assignee = None
        task.state = TaskState.PENDING
        task.timer_armed = False
        task.history.append(HistoryEntry(at, "system", "escalated"))
        payload: dict[str, Scalar] = {"role": task.role}
        if former:
            payload["former_assignee"] = former
        self._log.record(
            EventKind.TASK_ESCALATED,
            instance=task.instance,
            actor="system",
            at=at,
            task=task.id,
            payload=payload,
        )

    def due_tasks(self, now: float, running: Callable[[str], bool]) -> list[Task]:
        """Armed, non-terminal tasks of running instances whose deadline has passed."""
        due = [
            t
            for t in self._tasks.values()
            if t.timer_armed
            and t.state not in TERMINAL_TASK_STATES
            and t.deadline <= now
            and running(t.instance)
        ]
        due.sort(key=lambda t: (t.deadline, t.id))
        return due

    def all_open_tasks(self) -> Iterable[Task]:
        return (t for t in self._tasks.values() if t.state not in TERMINAL_TASK_STATES)

    def all_tasks(self) -> Iterable[Task]:
        return self._tasks.values()
