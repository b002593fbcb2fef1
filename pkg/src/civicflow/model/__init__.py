"""Process-definition language: types, parser, guards, and static validation."""

from civicflow.model.guards import Comparison, Guard, evaluate_guard, parse_guard
from civicflow.model.parser import parse_definition, serialize
from civicflow.model.types import (
    ActivityDef,
    ActivityKind,
    Diagnostic,
    ProcessDefinition,
    Severity,
    TimerPolicy,
    TransitionDef,
    ValidationReport,
    VariableDecl,
    VarType,
)
from civicflow.model.validate import validate

__all__ = [
    "ActivityDef",
    "ActivityKind",
    "Comparison",
    "Diagnostic",
    "Guard",
    "ProcessDefinition",
    "Severity",
    "TimerPolicy",
    "TransitionDef",
    "ValidationReport",
    "VariableDecl",
    "VarType",
    "evaluate_guard",
    "parse_definition",
    "parse_guard",
    "serialize",
    "validate",
]
