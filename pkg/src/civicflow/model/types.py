"""Domain types for process definitions."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from civicflow.model.guards import Guard, Scalar


class ActivityKind(str, Enum):
    START = "start"
    END = "end"
    HUMAN_TASK = "human-task"
    AUTOMATED = "automated"
    DECISION = "decision"


class VarType(str, Enum):
    STRING = "string"
    INT = "int"
    BOOL = "bool"

    def accepts(self, value: Scalar) -> bool:
        if self is VarType.BOOL:
            return isinstance(value, bool)
        if self is VarType.INT:
            return isinstance(value, int) and not isinstance(value, bool)
        return isinstance(value, str)


@dataclass(frozen=True)
class TimerPolicy:
    """Deadline behaviour for a human task, all durations in seconds."""

    expires_after: int
    escalate_to: str
    max_renewals: int = 0
    renewal_extension: int = 0


@dataclass(frozen=True)
class VariableDecl:
    """A declared instance variable; ``required`` ones must be supplied at start."""

    name: str
    type: VarType
    required: bool = False


@dataclass(frozen=True)
class ActivityDef:
    id: str
    kind: ActivityKind
    role: str | None = None
    connector: str | None = None
    timer: TimerPolicy | None = None
    form: tuple[str, ...] = ()


@dataclass(frozen=True)
class TransitionDef:
    from_id: str
    to_id: str
    guard: Guard | None = None


@dataclass(frozen=True)
class ProcessDefinition:
    id: str
    version: int
    name: str
    variables: tuple[VariableDecl, ...] = ()
    activities: tuple[ActivityDef, ...] = ()
    transitions: tuple[TransitionDef, ...] = ()

    @property
    def key(self) -> tuple[str, int]:
        return (self.id, self.version)

    @property
    def roles(self) -> set[str]:
        """Every role a definition references, incl. escalation targets."""
        out: set[str] = set()
        for activity in self.activities:
            if activity.role:
                out.add(activity.role)
            if activity.timer:
                out.add(activity.timer.escalate_to)
        return out

    def activity(self, activity_id: str) -> ActivityDef | None:
        for a in self.activities:
            if a.id == activity_id:
                return a
        return None

    def outgoing(self, activity_id: str) -> list[TransitionDef]:
        return [t for t in self.transitions if t.from_id == activity_id]

    def incoming(self, activity_id: str) -> list[TransitionDef]:
        return [t for t in self.transitions if t.to_id == activity_id]

    def declared_variables(self) -> dict[str, VariableDecl]:
        return {v.name: v for v in self.variables}


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    locus: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    diagnostics: tuple[Diagnostic, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(d.severity is Severity.ERROR for d in self.diagnostics)

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity is Severity.ERROR]


@dataclass(frozen=True)
class ParsedDuration:
    """Duration as written in source, kept so serialization round-trips the unit."""

    amount: int
    unit: str

    _UNIT_SECONDS = {"m": 60, "h": 3600, "d": 86400}

    @property
    def seconds(self) -> int:
        return self.amount * self._UNIT_SECONDS[self.unit]

    def render(self) -> str:
        return f"{self.amount}{self.unit}"

    @classmethod
    def from_seconds(cls, seconds: int) -> "ParsedDuration":
        for unit in ("d", "h", "m"):
            size = cls._UNIT_SECONDS[unit]
            if seconds % size == 0 and seconds >= size:
                return cls(seconds // size, unit)
        raise ValueError(f"duration {seconds}s is not an integer number of minutes")
