"""Process enactment: instances, token routing, connectors, and timers.

All mutations of one instance are serialized under its lock; distinct
instances advance independently.  Routing failures (a decision whose guards
are all false, a connector that exhausts its retries) never lose the token:
it stays on the activity, an alert event is appended, and the instance keeps
running so a supervisor can terminate or retry.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable

from civicflow.clock import Clock
from civicflow.errors import (
    ActivityNotActive,
    ClockRegression,
    ConnectorFailure,
    DuplicateDefinition,
    GuardTypeError,
    InvalidDefinition,
    InvalidOutput,
    InvalidVariables,
    NoTransitionSatisfied,
    NotRunning,
    PrivilegeDenied,
    UnboundVariable,
    UnknownDefinition,
    UnknownInstance,
)
from civicflow.events import EventKind, Scalar, flatten
from civicflow.ids import IdSource
from civicflow.model.guards import evaluate_guard
from civicflow.model.types import ActivityDef, ActivityKind, ProcessDefinition
from civicflow.model.validate import validate
from civicflow.state import InstanceSnapshot, InstanceState
from civicflow.tracking import EventLog

logger = logging.getLogger(__name__)

MAX_ROUTING_DEPTH = 200


@dataclass
class ProcessInstance:
    id: str
    definition: tuple[str, int]
    state: InstanceState
    variables: dict[str, Scalar]
    active: set[str]
    created_at: float
    initiator: str
    closed_at: float | None = None
    end_reached: bool = False
    lock: threading.RLock = field(default_factory=threading.RLock, repr=False, compare=False)


@dataclass(frozen=True)
class TimerFiring:
    task_id: str
    action: str
    deadline: float


@dataclass(frozen=True)
class _RoutingFault:
    activity: str
    reason: str


class Engine:
    def __init__(
        self,
        log: EventLog,
        clock: Clock,
        ids: IdSource,
        connectors,
        supervise_check: Callable[[str], bool] | None = None,
        connector_attempts: int = 3,
        connector_backoff: float = 0.0,
    ):
        self._log = log
        self._clock = clock
        self._ids = ids
        self._connectors = connectors
        self._supervise_check = supervise_check
        self._connector_attempts = connector_attempts
        self._connector_backoff = connector_backoff
        self._definitions: dict[tuple[str, int], ProcessDefinition] = {}
        self._instances: dict[str, ProcessInstance] = {}
        self._registry_lock = threading.Lock()
        self._last_tick = float("-inf")
        self._tasks = None

    def bind_task_service(self, task_service) -> None:
        self._tasks = task_service

    # -- definitions -----------------------------------------------------------

    def add_definition(self, definition: ProcessDefinition) -> ProcessDefinition:
        """Deploy a validated definition; (id, version) pairs are immutable."""
        report = validate(definition, self._connectors.names())
        if not report.ok:
            problems = "; ".join(f"{d.locus}: {d.message}" for d in report.errors)
            raise InvalidDefinition(f"definition does not validate: {problems}")
        with self._registry_lock:
            if definition.key in self._definitions:
                raise DuplicateDefinition(
                    f"definition {definition.id} v{definition.version} already deployed"
                )
            self._definitions[definition.key] = definition
        return definition

    def get_definition(self, def_id: str, version: int | None = None) -> ProcessDefinition:
        with self._registry_lock:
            if version is not None:
                found = self._definitions.get((def_id, version))
            else:
                versions = [v for (d, v) in self._definitions if d == def_id]
                found = self._definitions.get((def_id, max(versions))) if versions else None
        if found is None:
            raise UnknownDefinition(f"definition {def_id!r} v{version or 'latest'} not deployed")
        return found

    def definitions(self) -> list[ProcessDefinition]:
        with self._registry_lock:
            return sorted(self._definitions.values(), key=lambda d: d.key)

    # -- instance lifecycle ------------------------------------------------------

    def start_instance(
        self,
        def_id: str,
        variables: dict[str, Scalar],
        initiator: str,
        version: int | None = None,
    ) -> ProcessInstance:
        """Create a running instance and route the token out of start."""
        definition = self.get_definition(def_id, version)
        self._check_start_variables(definition, variables)
        now = self._clock.now()
        instance = ProcessInstance(
            id=self._ids.new("wf"),
            definition=definition.key,
            state=InstanceState.RUNNING,
            variables=dict(variables),
            active=set(),
            created_at=now,
            initiator=initiator,
        )
        with instance.lock:
            with self._registry_lock:
                self._instances[instance.id] = instance
            self._log.record(
                EventKind.INSTANCE_STARTED,
                instance=instance.id,
                actor=initiator,
                at=now,
                payload={
                    "definition": definition.id,
                    "version": definition.version,
                    **flatten("var", instance.variables),
                },
            )
            start = next(a for a in definition.activities if a.kind is ActivityKind.START)
            self._route_from(instance, definition, start.id, depth=0)
            self._check_completion(instance)
        return instance

    def advance(
        self, instance_id: str, completed_activity: str, outputs: dict[str, Scalar] | None = None
    ) -> ProcessInstance:
        """Move the token past an active activity.

        A human activity with an open task is completed on the caller's behalf
        (actor ``system``); a parked automated activity is retried; decisions
        are re-routed.  Routing failures park the instance and re-raise.
        """
        outputs = dict(outputs or {})
        instance = self.get_instance(instance_id)
        with instance.lock:
            if instance.state is not InstanceState.RUNNING:
                raise NotRunning(f"instance {instance_id} is {instance.state.value}")
            if completed_activity not in instance.active:
                raise ActivityNotActive(f"activity {completed_activity!r} is not active")
            definition = self.get_definition(*instance.definition)
            activity = definition.activity(completed_activity)
            open_task = self._tasks.open_task_for_activity(instance_id, completed_activity)
            faults: list[_RoutingFault] = []
            if open_task is not None:
                self.check_task_output(instance_id, open_task.form, outputs)
                self._tasks.system_complete(open_task.id, outputs)
                instance.variables.update(outputs)
                faults = self._route_from(instance, definition, completed_activity, depth=0)
            else:
                if outputs:
                    raise InvalidVariables(
                        "variables only change through task outputs or start parameters"
                    )
                if activity is not None and activity.kind is ActivityKind.AUTOMATED:
                    faults = self._invoke_automated(instance, definition, activity, depth=0)
                else:
                    faults = self._route_from(instance, definition, completed_activity, depth=0)
            self._check_completion(instance)
            if faults:
                raise NoTransitionSatisfied(f"{faults[0].activity}: {faults[0].reason}")
        return instance

    def on_task_completed(
        self, instance_id: str, activity_id: str, outputs: dict[str, Scalar]
    ) -> None:
        """Called by the task service after a completion event; routes onward."""
        instance = self.get_instance(instance_id)
        with instance.lock:
            instance.variables.update(outputs)
            if instance.state is not InstanceState.RUNNING or activity_id not in instance.active:
                return
            definition = self.get_definition(*instance.definition)
            faults = self._route_from(instance, definition, activity_id, depth=0)
            if faults:
                logger.warning("instance %s parked: %s", instance_id, faults)
            self._check_completion(instance)

    def on_task_failed(self, instance_id: str, activity_id: str, task_id: str, fault: str) -> None:
        """A failed task parks the instance with an alert for supervisory action."""
        instance = self.get_instance(instance_id)
        with instance.lock:
            self._alert(
                instance,
                reason="task-failed",
                detail=fault,
                activity=activity_id,
                task=task_id,
            )

    def terminate(self, instance_id: str, actor: str, reason: str) -> ProcessInstance:
        """Supervisor stop: open tasks are cancelled out of every worklist."""
        if self._supervise_check is not None and not self._supervise_check(actor):
            raise PrivilegeDenied(f"{actor!r} lacks privilege supervise")
        instance = self.get_instance(instance_id)
        with instance.lock:
            if instance.state is not InstanceState.RUNNING:
                raise NotRunning(f"instance {instance_id} is {instance.state.value}")
            instance.state = InstanceState.TERMINATED
            instance.closed_at = self._clock.now()
            self._log.record(
                EventKind.INSTANCE_TERMINATED,
                instance=instance.id,
                actor=actor,
                at=instance.closed_at,
                payload={"reason": reason},
            )
        return instance

    # -- timers ---------------------------------------------------------------------

    def tick(self, now: float) -> list[TimerFiring]:
        """Fire every due deadline exactly once, in (deadline, task id) order."""
        if now < self._last_tick:
            raise ClockRegression(f"tick at {now} precedes previous tick {self._last_tick}")
        self._last_tick = now
        firings: list[TimerFiring] = []
        while True:
            due = self._tasks.due_tasks(now, self.is_running)
            if not due:
                break
            for task in due:
                deadline = task.deadline
                instance = self.get_instance(task.instance)
                with instance.lock:
                    if (
                        task.timer_armed
                        and task.deadline <= now
                        and task.deadline == deadline
                        and self.is_running(task.instance)
                    ):
                        fired = self._tasks.on_expiry(task.id, at=now)
                        firings.append(
                            TimerFiring(
                                task_id=fired.id,
                                action=fired.history[-1].action,
                                deadline=deadline,
                            )
                        )
        return firings

    # -- queries ----------------------------------------------------------------------

    def get_instance(self, instance_id: str) -> ProcessInstance:
        with self._registry_lock:
            instance = self._instances.get(instance_id)
        if instance is None:
            raise UnknownInstance(f"instance {instance_id!r} not found")
        return instance

    def instances(self) -> list[ProcessInstance]:
        with self._registry_lock:
            return list(self._instances.values())

    def is_running(self, instance_id: str) -> bool:
        with self._registry_lock:
            instance = self._instances.get(instance_id)
        return instance is not None and instance.state is InstanceState.RUNNING

    def instance_lock(self, instance_id: str) -> threading.RLock:
        return self.get_instance(instance_id).lock

    def snapshot(self, instance_id: str) -> InstanceSnapshot:
        """Comparable live state of one instance, tasks included."""
        instance = self.get_instance(instance_id)
        with instance.lock:
            return InstanceSnapshot(
                id=instance.id,
                definition=instance.definition,
                state=instance.state,
                variables=dict(instance.variables),
                active=frozenset(instance.active),
                created_at=instance.created_at,
                closed_at=instance.closed_at,
                initiator=instance.initiator,
                end_reached=instance.end_reached,
                tasks=self._tasks.snapshots_of_instance(instance_id),
            )

    def check_task_output(
        self, instance_id: str, form: tuple[str, ...], output: dict[str, Scalar]
    ) -> None:
        """Outputs must cover the form fields and respect declared types."""
        instance = self.get_instance(instance_id)
        definition = self.get_definition(*instance.definition)
        declared = definition.declared_variables()
        for fieldname in form:
            if fieldname not in output:
                raise InvalidOutput(f"output missing required form field {fieldname!r}")
        for name, value in output.items():
            decl = declared.get(name)
            if decl is None:
                raise InvalidOutput(f"output names undeclared variable {name!r}")
            if not decl.type.accepts(value):
                raise InvalidOutput(
                    f"output {name!r} must be {decl.type.value}, got {type(value).__name__}"
                )

    # -- internals -------------------------------------------------------------------

    def _check_start_variables(
        self, definition: ProcessDefinition, variables: dict[str, Scalar]
    ) -> None:
        declared = definition.declared_variables()
        for decl in definition.variables:
            if decl.required and decl.name not in variables:
                raise InvalidVariables(f"missing required start variable {decl.name!r}")
        for name, value in variables.items():
            decl = declared.get(name)
            if decl is None:
                raise InvalidVariables(f"undeclared variable {name!r}")
            if not decl.type.accepts(value):
                raise InvalidVariables(
                    f"variable {name!r} must be {decl.type.value}, got {type(value).__name__}"
                )

    def _route_from(
        self,
        instance: ProcessInstance,
        definition: ProcessDefinition,
        activity_id: str,
        depth: int,
    ) -> list[_RoutingFault]:
        """Fire satisfied outgoing transitions; the token stays put on failure."""
        if depth > MAX_ROUTING_DEPTH:
            self._alert(instance, reason="routing-depth-exceeded", activity=activity_id)
            return [_RoutingFault(activity_id, "routing depth exceeded")]
        activity = definition.activity(activity_id)
        outgoing = definition.outgoing(activity_id)
        try:
            if activity is not None and activity.kind is ActivityKind.DECISION:
                satisfied = []
                for tr in outgoing:
                    if tr.guard is not None and evaluate_guard(tr.guard, instance.variables):
                        satisfied = [tr]
                        break
            else:
                satisfied = [
                    tr
                    for tr in outgoing
                    if tr.guard is None or evaluate_guard(tr.guard, instance.variables)
                ]
        except (UnboundVariable, GuardTypeError) as exc:
            self._alert(instance, reason="guard-error", detail=str(exc), activity=activity_id)
            return [_RoutingFault(activity_id, str(exc))]
        if not satisfied:
            self._alert(instance, reason="no-transition-satisfied", activity=activity_id)
            return [_RoutingFault(activity_id, "no outgoing transition satisfied")]
        instance.active.discard(activity_id)
        faults: list[_RoutingFault] = []
        for tr in satisfied:
            faults.extend(self._activate(instance, definition, tr.to_id, activity_id, depth + 1))
        return faults

    def _activate(
        self,
        instance: ProcessInstance,
        definition: ProcessDefinition,
        target_id: str,
        via: str,
        depth: int,
    ) -> list[_RoutingFault]:
        target = definition.activity(target_id)
        if target is None:
            self._alert(instance, reason="unknown-activity", activity=target_id)
            return [_RoutingFault(target_id, "transition to unknown activity")]
        self._log.record(
            EventKind.ACTIVITY_ACTIVATED,
            instance=instance.id,
            actor="system",
            at=self._clock.now(),
            payload={
                "activity": target_id,
                "activity_kind": target.kind.value,
                "via": via,
            },
        )
        if target.kind is ActivityKind.END:
            instance.end_reached = True
            return []
        instance.active.add(target_id)
        if target.kind is ActivityKind.HUMAN_TASK:
            self._tasks.create_task(instance.id, target, instance.variables, self._clock.now())
            return []
        if target.kind is ActivityKind.AUTOMATED:
            return self._invoke_automated(instance, definition, target, depth)
        if target.kind is ActivityKind.DECISION:
            return self._route_from(instance, definition, target_id, depth)
        self._alert(instance, reason="unroutable-activity", activity=target_id)
        return [_RoutingFault(target_id, f"cannot activate {target.kind.value} activity")]

    def _invoke_automated(
        self,
        instance: ProcessInstance,
        definition: ProcessDefinition,
        activity: ActivityDef,
        depth: int,
    ) -> list[_RoutingFault]:
        """Run the connector with retries; on success route the token onward."""
        assert activity.connector is not None
        last_error = ""
        for attempt in range(1, self._connector_attempts + 1):
            try:
                self._connectors.invoke(
                    activity.connector,
                    instance.id,
                    activity.id,
                    instance.variables,
                    attempt=attempt,
                )
            except ConnectorFailure as exc:
                last_error = str(exc)
                if attempt < self._connector_attempts and self._connector_backoff > 0:
                    self._clock.sleep(self._connector_backoff)
                continue
            return self._route_from(instance, definition, activity.id, depth)
        self._alert(
            instance,
            reason="connector-failure",
            detail=last_error,
            activity=activity.id,
        )
        return [_RoutingFault(activity.id, f"connector failed: {last_error}")]

    def _check_completion(self, instance: ProcessInstance) -> None:
        if (
            instance.state is InstanceState.RUNNING
            and instance.end_reached
            and not instance.active
        ):
            instance.state = InstanceState.COMPLETED
            instance.closed_at = self._clock.now()
            self._log.record(
                EventKind.INSTANCE_COMPLETED,
                instance=instance.id,
                actor="system",
                at=instance.closed_at,
            )

    def _alert(
        self,
        instance: ProcessInstance,
        reason: str,
        detail: str = "",
        activity: str | None = None,
        task: str | None = None,
    ) -> None:
        payload: dict[str, Scalar] = {"reason": reason}
        if detail:
            payload["detail"] = detail
        if activity:
            payload["activity"] = activity
        self._log.record(
            EventKind.ALERT,
            instance=instance.id,
            actor="system",
            at=self._clock.now(),
            task=task,
            payload=payload,
        )
