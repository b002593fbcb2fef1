"""Event records and their newline-delimited wire format.

Every state transition in the system appends exactly one record; the log is
the sole source of truth for tracking, replay, and metrics.  The export
format is one record per line: space-separated ``key=value`` pairs with
``seq`` first, payload keys sorted, and values carrying a one-letter type
tag (``i:``/``f:``/``b:``/``s:``) so that replay round-trips scalar types
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from urllib.parse import quote, unquote

from civicflow.errors import MalformedEvent

Scalar = str | int | bool | float


class EventKind(str, Enum):
    INSTANCE_STARTED = "instance-started"
    ACTIVITY_ACTIVATED = "activity-activated"
    TASK_CREATED = "task-created"
    TASK_CLAIMED = "task-claimed"
    TASK_COMPLETED = "task-completed"
    TASK_FAILED = "task-failed"
    TASK_DELEGATED = "task-delegated"
    TASK_RENEWED = "task-renewed"
    TASK_ESCALATED = "task-escalated"
    CONNECTOR_INVOKED = "connector-invoked"
    CONNECTOR_FAILED = "connector-failed"
    INSTANCE_COMPLETED = "instance-completed"
    INSTANCE_TERMINATED = "instance-terminated"
    ALERT = "alert"


TASK_KINDS = frozenset(
    {
        EventKind.TASK_CREATED,
        EventKind.TASK_CLAIMED,
        EventKind.TASK_COMPLETED,
        EventKind.TASK_FAILED,
        EventKind.TASK_DELEGATED,
        EventKind.TASK_RENEWED,
        EventKind.TASK_ESCALATED,
    }
)

SYSTEM_ACTOR = "system"

_SAFE = "-_.~"


@dataclass(frozen=True)
class EventRecord:
    seq: int
    at: float
    instance: str
    actor: str
    kind: EventKind
    task: str | None = None
    payload: dict[str, Scalar] = field(default_factory=dict)

    def check(self) -> None:
        """Raise MalformedEvent unless the record is complete for its kind."""
        if not self.instance:
            raise MalformedEvent("event missing instance id")
        if not self.actor:
            raise MalformedEvent("event missing actor")
        if not isinstance(self.kind, EventKind):
            raise MalformedEvent(f"unknown event kind {self.kind!r}")
        if self.kind in TASK_KINDS and not self.task:
            raise MalformedEvent(f"{self.kind.value} event missing task id")
        for key, value in self.payload.items():
            if not isinstance(value, (str, int, bool, float)):
                raise MalformedEvent(f"payload value for {key!r} is not a scalar")


def _encode_scalar(value: Scalar) -> str:
    if isinstance(value, bool):
        return "b:true" if value else "b:false"
    if isinstance(value, int):
        return f"i:{value}"
    if isinstance(value, float):
        return f"f:{value!r}"
    return "s:" + quote(value, safe=_SAFE)


def _decode_scalar(text: str) -> Scalar:
    tag, _, body = text.partition(":")
    if tag == "i":
        return int(body)
    if tag == "f":
        return float(body)
    if tag == "b":
        return body == "true"
    if tag == "s":
        return unquote(body)
    raise MalformedEvent(f"unknown scalar tag in {text!r}")


def _render_timestamp(at: float) -> str:
    if float(at).is_integer():
        return str(int(at))
    return repr(float(at))


def encode_line(record: EventRecord) -> str:
    """Render one record as a log line, deterministic for identical records."""
    parts = [
        f"seq={record.seq}",
        f"at={_render_timestamp(record.at)}",
        f"instance={quote(record.instance, safe=_SAFE)}",
    ]
    if record.task is not None:
        parts.append(f"task={quote(record.task, safe=_SAFE)}")
    parts.append(f"actor={quote(record.actor, safe=_SAFE)}")
    parts.append(f"kind={record.kind.value}")
    for key in sorted(record.payload):
        parts.append(f"{key}={_encode_scalar(record.payload[key])}")
    return " ".join(parts)


def decode_line(line: str) -> EventRecord:
    """Parse one log line back into an EventRecord."""
    fields: dict[str, str] = {}
    payload: dict[str, Scalar] = {}
    for token in line.split(" "):
        if not token:
            continue
        key, sep, value = token.partition("=")
        if not sep:
            raise MalformedEvent(f"token {token!r} is not key=value")
        if key in ("seq", "at", "instance", "task", "actor", "kind"):
            fields[key] = value
        else:
            payload[key] = _decode_scalar(value)
    try:
        record = EventRecord(
            seq=int(fields["seq"]),
            at=float(fields["at"]),
            instance=unquote(fields["instance"]),
            actor=unquote(fields["actor"]),
            kind=EventKind(fields["kind"]),
            task=unquote(fields["task"]) if "task" in fields else None,
            payload=payload,
        )
    except (KeyError, ValueError) as exc:
        raise MalformedEvent(f"bad log line {line!r}: {exc}") from exc
    record.check()
    return record


def flatten(prefix: str, values: dict[str, Scalar]) -> dict[str, Scalar]:
    """Flatten a variable map into prefixed payload keys (``var.amount=i:5``)."""
    return {f"{prefix}.{name}": value for name, value in values.items()}


def unflatten(prefix: str, payload: dict[str, Scalar]) -> dict[str, Scalar]:
    """Inverse of flatten: extract the map stored under ``prefix.``."""
    head = prefix + "."
    return {key[len(head) :]: value for key, value in payload.items() if key.startswith(head)}
