"""Connector registry and mock external-government clients.

Automated activities call out through registered connectors.  Invocations are
idempotent per (instance id, activity id): a replayed key returns the stored
result without touching the external system again.  Two mock clients ship:
a billing system ("laifoms") and a staff directory ("lahrms"); both can be
pointed at HTTP stubs via configuration instead of the in-process mocks.
"""

from __future__ import annotations

import json
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from civicflow.errors import (
    ConnectorFailure,
    DuplicateConnector,
    UnknownConnector,
    UnknownOfficer,
)
from civicflow.events import EventKind, Scalar
from civicflow.tracking import EventLog

BILLING_CONNECTOR = "laifoms"
NOTICE_CONNECTOR = "notice"


@dataclass(frozen=True)
class InvocationContext:
    instance: str
    activity: str

    @property
    def key(self) -> str:
        return f"{self.instance}/{self.activity}"


class Connector(Protocol):
    name: str

    def invoke(self, variables: dict[str, Scalar], context: InvocationContext) -> dict[str, Scalar]:
        """Run the external call; raise ConnectorFailure on failure."""


@dataclass(frozen=True)
class BillingRecord:
    key: str
    instance: str
    amount: int
    status: str = "invoiced"


@dataclass(frozen=True)
class StaffRecord:
    officer_id: str
    name: str
    role: str
    department: str


class BillingClient:
    """In-process billing mock: at most one invoice per idempotency key."""

    name = BILLING_CONNECTOR

    def __init__(self, amount_variable: str = "fee_minor"):
        self.amount_variable = amount_variable
        self.records: dict[str, BillingRecord] = {}
        self._lock = threading.Lock()

    def invoke(self, variables: dict[str, Scalar], context: InvocationContext) -> dict[str, Scalar]:
        amount = variables.get(self.amount_variable)
        if not isinstance(amount, int) or isinstance(amount, bool):
            raise ConnectorFailure(f"billing needs integer variable {self.amount_variable!r}")
        with self._lock:
            if context.key not in self.records:
                self.records[context.key] = BillingRecord(
                    key=context.key, instance=context.instance, amount=amount
                )
        return {"invoice": f"INV-{context.key}", "amount_minor": amount}


class NoticeClient:
    """Formal-notice dispatch stub; always succeeds with no outputs."""

    name = NOTICE_CONNECTOR

    def invoke(self, variables: dict[str, Scalar], context: InvocationContext) -> dict[str, Scalar]:
        return {}


class HttpBillingClient:
    """Billing over an HTTP stub endpoint instead of the in-process mock."""

    name = BILLING_CONNECTOR

    def __init__(self, base_url: str, amount_variable: str = "fee_minor"):
        self.base_url = base_url.rstrip("/")
        self.amount_variable = amount_variable

    def invoke(self, variables: dict[str, Scalar], context: InvocationContext) -> dict[str, Scalar]:
        body = json.dumps(
            {
                "key": context.key,
                "instance": context.instance,
                "amount": variables.get(self.amount_variable),
            }
        ).encode("utf-8")
        request = urllib.request.Request(
            f"{self.base_url}/invoices",
            data=body,
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(request, timeout=5) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except Exception as exc:
            raise ConnectorFailure(f"billing stub unreachable: {exc}") from exc
        return {
            "invoice": str(payload.get("invoice", "")),
            "amount_minor": int(payload.get("amount", 0)),
        }


class StaffDirectory:
    """Read-only staff reference data loaded from a delimited fixture file."""

    def __init__(self, records: dict[str, StaffRecord] | None = None):
        self._records = dict(records or {})

    @classmethod
    def from_file(cls, path: str | Path) -> "StaffDirectory":
        records: dict[str, StaffRecord] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split("\t")]
            if len(parts) != 4:
                raise ValueError(f"staff fixture line needs 4 tab-separated fields: {line!r}")
            records[parts[0]] = StaffRecord(*parts)
        return cls(records)

    def lookup_officer(self, officer_id: str) -> StaffRecord:
        record = self._records.get(officer_id)
        if record is None:
            raise UnknownOfficer(f"officer {officer_id!r} not in directory")
        return record

    def all_records(self) -> list[StaffRecord]:
        return sorted(self._records.values(), key=lambda r: r.officer_id)


class HttpStaffDirectory:
    """Staff lookups against an HTTP stub endpoint."""

    def __init__(self, base_url: str):
        self.base_url = base_url.rstrip("/")

    def lookup_officer(self, officer_id: str) -> StaffRecord:
        try:
            with urllib.request.urlopen(
                f"{self.base_url}/staff/{officer_id}", timeout=5
            ) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code == 404:
                raise UnknownOfficer(f"officer {officer_id!r} not in directory") from exc
            raise ConnectorFailure(f"staff stub error: {exc}") from exc
        except Exception as exc:
            raise ConnectorFailure(f"staff stub unreachable: {exc}") from exc
        return StaffRecord(
            officer_id=str(payload["officer_id"]),
            name=str(payload["name"]),
            role=str(payload["role"]),
            department=str(payload["department"]),
        )


class ConnectorRegistry:
    """Named connectors plus per-key invocation dedup and attempt logging."""

    def __init__(self, log: EventLog, clock):
        self._log = log
        self._clock = clock
        self._lock = threading.RLock()
        self._connectors: dict[str, Connector] = {}
        self._results: dict[str, dict[str, Scalar]] = {}

    def register(self, connector: Connector) -> None:
        with self._lock:
            if connector.name in self._connectors:
                raise DuplicateConnector(f"connector {connector.name!r} already registered")
            self._connectors[connector.name] = connector

    def names(self) -> set[str]:
        with self._lock:
            return set(self._connectors)

    def get(self, name: str) -> Connector:
        with self._lock:
            connector = self._connectors.get(name)
        if connector is None:
            raise UnknownConnector(f"connector {name!r} is not registered")
        return connector

    def invoke(
        self,
        name: str,
        instance: str,
        activity: str,
        variables: dict[str, Scalar],
        attempt: int = 1,
    ) -> dict[str, Scalar]:
        """Invoke a connector; a repeated idempotency key returns the stored result.

        Every attempt, success or failure, appends a tracking event.
        """
        connector = self.get(name)
        context = InvocationContext(instance=instance, activity=activity)
        with self._lock:
            stored = self._results.get(context.key)
        if stored is not None:
            self._record_invoked(name, context, attempt, stored, deduplicated=True)
            return dict(stored)
        try:
            outputs = connector.invoke(dict(variables), context)
        except ConnectorFailure as exc:
            self._log.record(
                EventKind.CONNECTOR_FAILED,
                instance=instance,
                actor="system",
                at=self._clock.now(),
                payload={
                    "connector": name,
                    "activity": activity,
                    "attempt": attempt,
                    "error": str(exc),
                },
            )
            raise
        with self._lock:
            # first writer wins; a racing duplicate returns the stored outputs
            stored = self._results.setdefault(context.key, dict(outputs))
        self._record_invoked(name, context, attempt, stored, deduplicated=False)
        return dict(stored)

    def _record_invoked(
        self,
        name: str,
        context: InvocationContext,
        attempt: int,
        outputs: dict[str, Scalar],
        deduplicated: bool,
    ) -> None:
        payload: dict[str, Scalar] = {
            "connector": name,
            "activity": context.activity,
            "attempt": attempt,
        }
        if deduplicated:
            payload["deduplicated"] = True
        for key, value in outputs.items():
            payload[f"out.{key}"] = value
        self._log.record(
            EventKind.CONNECTOR_INVOKED,
            instance=context.instance,
            actor="system",
            at=self._clock.now(),
            payload=payload,
        )
