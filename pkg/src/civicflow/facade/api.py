"""HTTP/JSON facade over the runtime.

Every module operation is reachable here; every domain error maps to a
stable (HTTP status, error code) pair where the code is the error class
name, so clients can match on codes instead of prose.  Authentication is a
session token in the ``X-Auth-Token`` header.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from civicflow import errors
from civicflow.clock import SimulatedClock
from civicflow.engine import ProcessInstance
from civicflow.events import EventKind, EventRecord
from civicflow.identity import PrincipalKind, Privilege
from civicflow.model.parser import serialize
from civicflow.notifications import NotificationFilter, NotificationMessage
from civicflow.runtime import Runtime
from civicflow.state import TaskState
from civicflow.tasks import Task

ERROR_STATUS: dict[str, int] = {
    # 401 — who are you
    "Unauthenticated": 401,
    "BadCredentials": 401,
    "UnknownToken": 401,
    "ExpiredToken": 401,
    # 403 — you may not
    "PrivilegeDenied": 403,
    "RoleMismatch": 403,
    "NotAssignee": 403,
    # 404 — no such resource
    "UnknownDefinition": 404,
    "UnknownInstance": 404,
    "UnknownTask": 404,
    "UnknownPrincipal": 404,
    "UnknownRole": 404,
    "UnknownOfficer": 404,
    "UnknownConnector": 404,
    "UnknownSubscription": 404,
    # 409 — state conflict
    "NotPending": 409,
    "NotClaimed": 409,
    "NotRunning": 409,
    "TerminalState": 409,
    "RenewalsExhausted": 409,
    "ActivityNotActive": 409,
    "NoTransitionSatisfied": 409,
    "ClockRegression": 409,
    "ConnectorFailure": 409,
    "DuplicateId": 409,
    "DuplicateDefinition": 409,
    "DuplicateRole": 409,
    "DuplicateConnector": 409,
    "DuplicateChannel": 409,
    # 422 — the request body does not validate
    "ParseError": 422,
    "InvalidDefinition": 422,
    "InvalidVariables": 422,
    "InvalidOutput": 422,
    "IneligibleDelegate": 422,
    "EmptyFilter": 422,
    "UnknownChannel": 422,
    "MalformedEvent": 422,
    "UnboundVariable": 422,
    "GuardTypeError": 422,
}


class LoginBody(BaseModel):
    id: str
    secret: str


class StartInstanceBody(BaseModel):
    definition: str
    version: int | None = None
    variables: dict[str, Any] = {}


class CompleteBody(BaseModel):
    output: dict[str, Any] = {}


class FailBody(BaseModel):
    fault: str


class DelegateBody(BaseModel):
    to: str


class TerminateBody(BaseModel):
    reason: str = ""


class AdvanceBody(BaseModel):
    activity: str
    outputs: dict[str, Any] = {}


class SubscribeBody(BaseModel):
    channel: str
    instance: str | None = None
    kinds: list[str] | None = None
    role: str | None = None


class UserBody(BaseModel):
    id: str
    name: str
    kind: str = "officer"
    secret: str
    properties: dict[str, str] = {}


class RoleBody(BaseModel):
    role: str


class NewRoleBody(BaseModel):
    name: str
    privileges: list[str] = []


class TickBody(BaseModel):
    seconds: float


def instance_dto(instance: ProcessInstance) -> dict:
    return {
        "id": instance.id,
        "definition": {"id": instance.definition[0], "version": instance.definition[1]},
        "state": instance.state.value,
        "active": sorted(instance.active),
        "created_at": instance.created_at,
        "closed_at": instance.closed_at,
        "initiator": instance.initiator,
    }


def task_dto(task: Task) -> dict:
    return {
        "id": task.id,
        "instance": task.instance,
        "activity": task.activity,
        "state": task.state.value,
        "role": task.role,
        "assignee": task.assignee,
        "input": task.input,
        "output": task.output,
        "fault": task.fault,
        "deadline": task.deadline,
        "renewals_used": task.renewals_used,
        "max_renewals": task.policy.max_renewals,
        "form": list(task.form),
        "history": [
            {"at": h.at, "actor": h.actor, "action": h.action} for h in task.history
        ],
    }


def event_dto(event: EventRecord) -> dict:
    return {
        "seq": event.seq,
        "at": event.at,
        "instance": event.instance,
        "task": event.task,
        "actor": event.actor,
        "kind": event.kind.value,
        "payload": event.payload,
    }


def message_dto(message: NotificationMessage) -> dict:
    return {
        "id": message.id,
        "subscription": message.subscription,
        "event_seq": message.event_seq,
        "kind": message.kind.value,
        "rendered": message.rendered,
        "status": message.status.value,
    }


def create_app(runtime: Runtime, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="civicflow", version="0.1.0")

    @app.exception_handler(errors.WorkflowError)
    async def workflow_error_handler(request: Request, exc: errors.WorkflowError):
        status = ERROR_STATUS.get(exc.code, 500)
        return JSONResponse(
            status_code=status, content={"error": exc.code, "message": exc.message}
        )

    def caller(x_auth_token: str | None = Header(default=None)) -> str:
        if not x_auth_token:
            raise errors.Unauthenticated("missing X-Auth-Token header")
        return runtime.identity.resolve(x_auth_token)

    def privileged(privilege: Privilege):
        def check(principal: str = Depends(caller)) -> str:
            runtime.identity.require_privilege(principal, privilege)
            return principal

        return check

    # -- auth -----------------------------------------------------------------

    @app.post("/auth/login")
    def login(body: LoginBody):
        token = runtime.identity.authenticate(body.id, body.secret)
        principal = runtime.identity.principal(body.id)
        return {
            "token": token.token,
            "expires_at": token.expires_at,
            "principal": principal.public_view(),
        }

    @app.get("/me")
    def me(principal: str = Depends(caller)):
        view = runtime.identity.principal(principal).public_view()
        view["privileges"] = sorted(
            p.value for p in Privilege if runtime.identity.has_privilege(principal, p)
        )
        return view

    # -- definitions -------------------------------------------------------------

    @app.post("/definitions", status_code=201)
    async def deploy_definition(
        request: Request,
        principal: str = Depends(privileged(Privilege.DEPLOY_DEFINITION)),
    ):
        source = (await request.body()).decode("utf-8")
        definition = runtime.deploy(source)
        return {
            "id": definition.id,
            "version": definition.version,
            "name": definition.name,
            "activities": [a.id for a in definition.activities],
            "roles": sorted(definition.roles),
        }

    @app.get("/definitions")
    def list_definitions(principal: str = Depends(caller)):
        return [
            {"id": d.id, "version": d.version, "name": d.name}
            for d in runtime.engine.definitions()
        ]

    @app.get("/definitions/{def_id}/{version}")
    def get_definition(def_id: str, version: int, principal: str = Depends(caller)):
        definition = runtime.engine.get_definition(def_id, version)
        return {
            "id": definition.id,
            "version": definition.version,
            "name": definition.name,
            "variables": [
                {"name": v.name, "type": v.type.value, "required": v.required}
                for v in definition.variables
            ],
            "activities": [
                {
                    "id": a.id,
                    "kind": a.kind.value,
                    "role": a.role,
                    "connector": a.connector,
                    "form": list(a.form),
                }
                for a in definition.activities
            ],
            "source": serialize(definition),
        }

    # -- instances ---------------------------------------------------------------

    @app.post("/instances", status_code=201)
    def start_instance(
        body: StartInstanceBody,
        principal: str = Depends(privileged(Privilege.CLAIM_TASK)),
    ):
        instance = runtime.engine.start_instance(
            body.definition, body.variables, principal, version=body.version
        )
        return instance_dto(instance)

    @app.get("/instances/{instance_id}")
    def get_instance(instance_id: str, principal: str = Depends(caller)):
        instance = runtime.engine.get_instance(instance_id)
        _require_instance_visibility(runtime, principal, instance_id)
        return instance_dto(instance)

    @app.get("/instances/{instance_id}/events")
    def instance_events(
        instance_id: str,
        since_seq: int | None = None,
        kind: str | None = None,
        principal: str = Depends(caller),
    ):
        runtime.engine.get_instance(instance_id)
        records = runtime.tracking.query(
            caller=principal,
            instance=instance_id,
            kind=EventKind(kind) if kind else None,
            since_seq=since_seq,
        )
        return [event_dto(r) for r in records]

    @app.post("/admin/instances/{instance_id}/terminate")
    def terminate_instance(
        instance_id: str,
        body: TerminateBody,
        principal: str = Depends(privileged(Privilege.SUPERVISE)),
    ):
        instance = runtime.engine.terminate(instance_id, principal, body.reason)
        return instance_dto(instance)

    @app.post("/admin/instances/{instance_id}/advance")
    def advance_instance(
        instance_id: str,
        body: AdvanceBody,
        principal: str = Depends(privileged(Privilege.SUPERVISE)),
    ):
        """Supervisory repair: push a parked token onward (retries connectors)."""
        instance = runtime.engine.advance(instance_id, body.activity, body.outputs)
        return instance_dto(instance)

    # -- worklists and tasks --------------------------------------------------------

    @app.get("/worklist")
    def worklist(principal: str = Depends(caller)):
        wl = runtime.tasks.list_worklist(principal)
        return [task_dto(runtime.tasks.get(task_id)) for task_id in wl.items]

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str, principal: str = Depends(caller)):
        task = runtime.tasks.get(task_id)
        roles = runtime.identity.roles_of(principal)
        if not (
            task.assignee == principal
            or task.role in roles
            or runtime.identity.has_privilege(principal, Privilege.SUPERVISE)
        ):
            raise errors.PrivilegeDenied(f"{principal!r} may not view task {task_id}")
        return task_dto(task)

    @app.post("/tasks/{task_id}/claim")
    def claim_task(task_id: str, principal: str = Depends(privileged(Privilege.CLAIM_TASK))):
        return task_dto(runtime.tasks.claim(task_id, principal))

    @app.post("/tasks/{task_id}/complete")
    def complete_task(
        task_id: str,
        body: CompleteBody,
        principal: str = Depends(privileged(Privilege.CLAIM_TASK)),
    ):
        return task_dto(runtime.tasks.complete(task_id, principal, body.output))

    @app.post("/tasks/{task_id}/fail")
    def fail_task(
        task_id: str,
        body: FailBody,
        principal: str = Depends(privileged(Privilege.CLAIM_TASK)),
    ):
        return task_dto(runtime.tasks.fail(task_id, principal, body.fault))

    @app.post("/tasks/{task_id}/delegate")
    def delegate_task(
        task_id: str,
        body: DelegateBody,
        principal: str = Depends(privileged(Privilege.CLAIM_TASK)),
    ):
        return task_dto(runtime.tasks.delegate(task_id, principal, body.to))

    @app.post("/tasks/{task_id}/renew")
    def renew_task(task_id: str, principal: str = Depends(privileged(Privilege.CLAIM_TASK))):
        return task_dto(runtime.tasks.renew(task_id, principal))

    # -- staff directory ---------------------------------------------------------------

    @app.get("/staff/{officer_id}")
    def staff_lookup(officer_id: str, principal: str = Depends(caller)):
        record = runtime.staff.lookup_officer(officer_id)
        return {
            "officer_id": record.officer_id,
            "name": record.name,
            "role": record.role,
            "department": record.department,
        }

    # -- notifications ---------------------------------------------------------------

    @app.post("/subscriptions", status_code=201)
    def subscribe(
        body: SubscribeBody,
        principal: str = Depends(privileged(Privilege.CLAIM_TASK)),
    ):
        kinds = frozenset(EventKind(k) for k in body.kinds) if body.kinds else None
        subscription = runtime.notifications.subscribe(
            principal,
            NotificationFilter(instance=body.instance, kinds=kinds, role=body.role),
            body.channel,
        )
        return {
            "id": subscription.id,
            "channel": subscription.channel,
            "instance": subscription.filter.instance,
            "kinds": sorted(k.value for k in subscription.filter.kinds)
            if subscription.filter.kinds
            else None,
            "role": subscription.filter.role,
        }

    @app.get("/outbox")
    def outbox(principal: str = Depends(caller)):
        return [message_dto(m) for m in runtime.notifications.outbox(principal)]

    # -- administration -------------------------------------------------------------------

    @app.get("/admin/snapshot")
    def snapshot(principal: str = Depends(privileged(Privilege.SUPERVISE))):
        return dashboard_snapshot(runtime)

    @app.post("/admin/users", status_code=201)
    def add_user(
        body: UserBody, principal: str = Depends(privileged(Privilege.MANAGE_USERS))
    ):
        created = runtime.identity.register(
            principal,
            body.id,
            body.name,
            PrincipalKind(body.kind),
            body.secret,
            body.properties,
        )
        return created.public_view()

    @app.post("/admin/users/{principal_id}/roles")
    def grant_role(
        principal_id: str,
        body: RoleBody,
        principal: str = Depends(privileged(Privilege.MANAGE_USERS)),
    ):
        roles = runtime.identity.assign_role(principal, principal_id, body.role)
        return {"id": principal_id, "roles": sorted(roles)}

    @app.delete("/admin/users/{principal_id}/roles/{role}")
    def revoke_role(
        principal_id: str,
        role: str,
        principal: str = Depends(privileged(Privilege.MANAGE_USERS)),
    ):
        roles = runtime.identity.revoke_role(principal, principal_id, role)
        return {"id": principal_id, "roles": sorted(roles)}

    @app.post("/admin/roles", status_code=201)
    def create_role(
        body: NewRoleBody, principal: str = Depends(privileged(Privilege.MANAGE_USERS))
    ):
        role = runtime.identity.create_role(
            principal, body.name, {Privilege(p) for p in body.privileges}
        )
        return {"name": role.name, "privileges": sorted(p.value for p in role.privileges)}

    if runtime.config.test_mode:

        @app.post("/admin/tick")
        def tick(body: TickBody, principal: str = Depends(privileged(Privilege.SUPERVISE))):
            assert isinstance(runtime.clock, SimulatedClock)
            firings = runtime.advance_clock(body.seconds)
            return {
                "now": runtime.clock.now(),
                "firings": [
                    {"task": f.task_id, "action": f.action, "deadline": f.deadline}
                    for f in firings
                ],
            }

    if static_dir is not None:
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def _require_instance_visibility(runtime: Runtime, principal: str, instance_id: str) -> None:
    if runtime.identity.has_privilege(principal, Privilege.VIEW_ALL_TRACKING):
        return
    if runtime.tracking.initiator_of(instance_id) != principal:
        raise errors.PrivilegeDenied(f"{principal!r} may not view instance {instance_id}")


def dashboard_snapshot(runtime: Runtime) -> dict:
    """Supervisor dashboard: per-definition instance counts, open tasks, overdue list."""
    now = runtime.clock.now()
    per_definition: dict[str, dict[str, int]] = {}
    for instance in runtime.engine.instances():
        def_id = instance.definition[0]
        counts = per_definition.setdefault(
            def_id, {"running": 0, "completed": 0, "terminated": 0}
        )
        counts[instance.state.value] += 1
    open_by_state = {TaskState.PENDING.value: 0, TaskState.CLAIMED.value: 0}
    overdue = []
    for task in runtime.tasks.all_open_tasks():
        if not runtime.engine.is_running(task.instance):
            continue
        open_by_state[task.state.value] += 1
        if task.deadline <= now:
            overdue.append(
                {
                    "task": task.id,
                    "instance": task.instance,
                    "activity": task.activity,
                    "role": task.role,
                    "assignee": task.assignee,
                    "deadline": task.deadline,
                }
            )
    overdue.sort(key=lambda t: (t["deadline"], t["task"]))
    return {
        "definitions": per_definition,
        "open_tasks": open_by_state,
        "overdue": overdue,
        "now": now,
    }
