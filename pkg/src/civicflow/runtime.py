"""Composition root: builds and wires every service from one config.

The whole system runs in one process; the module boundaries are logical.
Test mode swaps in a simulated clock and a seeded id generator so scripted
scenarios produce byte-identical event logs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from civicflow.clock import Clock, SimulatedClock
from civicflow.engine import Engine
from civicflow.errors import ClockRegression, InvalidDefinition
from civicflow.events import EventKind
from civicflow.gateway import (
    BillingClient,
    ConnectorRegistry,
    HttpBillingClient,
    HttpStaffDirectory,
    NoticeClient,
    StaffDirectory,
)
from civicflow.identity import IdentityService, Privilege
from civicflow.ids import IdSource
from civicflow.model.parser import parse_definition
from civicflow.model.types import ProcessDefinition
from civicflow.model.validate import validate
from civicflow.notifications import (
    ConsoleChannel,
    NotificationService,
    OutboxFileChannel,
    WebhookChannel,
)
from civicflow.tasks import TaskService
from civicflow.tracking import EventLog, TrackingService, VisibilityPolicy


@dataclass
class RuntimeConfig:
    test_mode: bool = False
    seed: int | None = None
    clock_start: float = 0.0
    log_path: str | None = None
    outbox_path: str | None = None
    bootstrap_admin_id: str = "admin"
    bootstrap_admin_secret: str = "change-me"
    token_ttl: float = 8 * 3600
    webhook_url: str | None = None
    staff_fixture: str | None = None
    laifoms_url: str | None = None
    lahrms_url: str | None = None
    billing_amount_variable: str = "fee_minor"
    connector_attempts: int = 3
    connector_backoff: float = 0.0
    notification_max_attempts: int = 3
    notification_retry_interval: float = 0.0
    listen_host: str = "127.0.0.1"
    listen_port: int = 8571
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_yaml(cls, path: str | Path) -> "RuntimeConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        known = {f for f in cls.__dataclass_fields__ if f != "extra"}
        kwargs = {k: v for k, v in raw.items() if k in known}
        extra = {k: v for k, v in raw.items() if k not in known}
        return cls(**kwargs, extra=extra)


def fixture_text(name: str) -> str:
    return (resources.files("civicflow") / "fixtures" / name).read_text(encoding="utf-8")


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("civicflow") / "fixtures" / name))


class Runtime:
    """One deployment: all services constructed, wired, and bootstrapped."""

    def __init__(self, config: RuntimeConfig | None = None):
        self.config = config or RuntimeConfig()
        cfg = self.config

        if cfg.test_mode:
            self.clock: Clock = SimulatedClock(start=cfg.clock_start)
            self.ids = IdSource(seed=cfg.seed if cfg.seed is not None else 0)
        else:
            self.clock = Clock()
            self.ids = IdSource(seed=cfg.seed)

        self.log = EventLog(path=cfg.log_path)
        self.identity = IdentityService(
            clock=self.clock,
            token_ttl=cfg.token_ttl,
            hash_iterations=2_000 if cfg.test_mode else 100_000,
        )
        self.identity.bootstrap_admin(cfg.bootstrap_admin_id, cfg.bootstrap_admin_secret)

        self.connectors = ConnectorRegistry(self.log, self.clock)
        if cfg.laifoms_url:
            self.connectors.register(
                HttpBillingClient(cfg.laifoms_url, cfg.billing_amount_variable)
            )
            self.billing = None
        else:
            self.billing = BillingClient(cfg.billing_amount_variable)
            self.connectors.register(self.billing)
        self.connectors.register(NoticeClient())

        if cfg.lahrms_url:
            self.staff = HttpStaffDirectory(cfg.lahrms_url)
        else:
            staff_path = cfg.staff_fixture or fixture_path("staff.tsv")
            self.staff = StaffDirectory.from_file(staff_path)

        self.engine = Engine(
            log=self.log,
            clock=self.clock,
            ids=self.ids,
            connectors=self.connectors,
            supervise_check=lambda actor: self.identity.has_privilege(
                actor, Privilege.SUPERVISE
            ),
            connector_attempts=cfg.connector_attempts,
            connector_backoff=cfg.connector_backoff,
        )
        self.tasks = TaskService(
            log=self.log,
            clock=self.clock,
            ids=self.ids,
            roles_of=self.identity.roles_of,
            principal_exists=self.identity.principal_exists,
        )
        self.engine.bind_task_service(self.tasks)
        self.tasks.bind_engine(self.engine)

        self.tracking = TrackingService(
            self.log,
            visibility=VisibilityPolicy(
                lambda caller: self.identity.has_privilege(
                    caller, Privilege.VIEW_ALL_TRACKING
                )
            ),
        )

        self.notifications = NotificationService(
            log=self.log,
            clock=self.clock,
            ids=self.ids,
            principal_exists=self.identity.principal_exists,
            initiator_of=self.tracking.initiator_of,
            sees_all=lambda caller: self.identity.has_privilege(
                caller, Privilege.VIEW_ALL_TRACKING
            ),
            max_attempts=cfg.notification_max_attempts,
            retry_interval=cfg.notification_retry_interval,
        )
        self.notifications.register_channel(ConsoleChannel())
        self.notifications.register_channel(OutboxFileChannel(cfg.outbox_path))
        if cfg.webhook_url:
            self.notifications.register_channel(WebhookChannel(cfg.webhook_url))

        self.log.add_observer(self.notifications.dispatch)

    # -- deployment ---------------------------------------------------------------

    def deploy(self, source: str | ProcessDefinition) -> ProcessDefinition:
        """Parse (if text), validate against registered connectors, and deploy."""
        definition = parse_definition(source) if isinstance(source, str) else source
        report = validate(definition, self.connectors.names())
        if not report.ok:
            problems = "; ".join(f"{d.locus}: {d.message}" for d in report.errors)
            raise InvalidDefinition(problems)
        deployed = self.engine.add_definition(definition)
        for role in deployed.roles:
            self.identity.ensure_role(role)
        return deployed

    def deploy_fixture(self, name: str) -> ProcessDefinition:
        return self.deploy(fixture_text(f"{name}.wfd"))

    # -- test-mode helpers ---------------------------------------------------------

    def advance_clock(self, seconds: float) -> list:
        """Move the simulated clock and fire due timers (test mode only)."""
        if not isinstance(self.clock, SimulatedClock):
            raise RuntimeError("advance_clock requires test mode")
        if seconds < 0:
            raise ClockRegression("the simulated clock only moves forward")
        now = self.clock.advance(seconds)
        return self.engine.tick(now)

    def alerts(self, instance_id: str | None = None):
        return self.log.records(instance=instance_id, kind=EventKind.ALERT)

    def close(self) -> None:
        self.log.close()
