"""Shared state vocabulary: lifecycle enums and comparable snapshots.

Snapshots are the common shape for "what is the state right now" questions.
The live engine and task service produce them from in-memory objects; the
tracking service produces them by folding the event log.  Replay equivalence
means those two snapshots compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

Scalar = str | int | bool


class InstanceState(str, Enum):
    RUNNING = "running"
    COMPLETED = "completed"
    TERMINATED = "terminated"


class TaskState(str, Enum):
    PENDING = "pending"
    CLAIMED = "claimed"
    COMPLETED = "completed"
    FAILED = "failed"


TERMINAL_TASK_STATES = frozenset({TaskState.COMPLETED, TaskState.FAILED})


@dataclass(frozen=True)
class HistoryEntry:
    at: float
    actor: str
    action: str


@dataclass
class TaskSnapshot:
    id: str
    instance: str
    activity: str
    state: TaskState
    role: str
    assignee: str | None
    input: dict[str, Scalar]
    output: dict[str, Scalar] | None
    fault: str | None
    deadline: float
    renewals_used: int
    timer_armed: bool
    history: tuple[HistoryEntry, ...]


@dataclass
class InstanceSnapshot:
    id: str
    definition: tuple[str, int]
    state: InstanceState
    variables: dict[str, Scalar]
    active: frozenset[str]
    created_at: float
    closed_at: float | None
    initiator: str
    end_reached: bool
    tasks: dict[str, TaskSnapshot] = field(default_factory=dict)
