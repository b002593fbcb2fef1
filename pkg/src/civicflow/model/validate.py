"""Semantic validation of parsed process definitions.

All problems are reported as diagnostics; nothing raises.  A definition may
only be deployed to the engine when ``report.ok`` is true.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable

from civicflow.model.types import (
    ActivityKind,
    Diagnostic,
    ProcessDefinition,
    Severity,
    ValidationReport,
    VarType,
)


def validate(
    definition: ProcessDefinition, connectors: Iterable[str] = ()
) -> ValidationReport:
    """Check a parsed definition; ``connectors`` is the set of registered connector names."""
    known_connectors = set(connectors)
    diags: list[Diagnostic] = []

    def error(locus: str, message: str) -> None:
        diags.append(Diagnostic(Severity.ERROR, locus, message))

    def warning(locus: str, message: str) -> None:
        diags.append(Diagnostic(Severity.WARNING, locus, message))

    seen_ids: set[str] = set()
    for activity in definition.activities:
        if activity.id in seen_ids:
            error(activity.id, f"duplicate activity id {activity.id!r}")
        seen_ids.add(activity.id)

    declared = definition.declared_variables()
    ids = {a.id for a in definition.activities}

    for tr in definition.transitions:
        locus = f"{tr.from_id}->{tr.to_id}"
        for endpoint in (tr.from_id, tr.to_id):
            if endpoint not in ids:
                error(locus, f"transition references unknown activity {endpoint!r}")
        if tr.guard is not None:
            for comp in tr.guard.comparisons:
                decl = declared.get(comp.variable)
                if decl is None:
                    error(locus, f"guard references undeclared variable {comp.variable!r}")
                elif not _literal_matches(decl.type, comp.literal):
                    error(
                        locus,
                        f"guard compares {comp.variable!r} ({decl.type.value}) "
                        f"against a {_literal_type(comp.literal)} literal",
                    )

    for activity in definition.activities:
        outgoing = definition.outgoing(activity.id)
        incoming = definition.incoming(activity.id)
        if activity.kind is ActivityKind.START and incoming:
            error(activity.id, "start activity must not have incoming transitions")
        if activity.kind is ActivityKind.END and outgoing:
            error(activity.id, "end activity must not have outgoing transitions")
        if activity.kind is ActivityKind.HUMAN_TASK:
            if not activity.role:
                error(activity.id, "human task must declare a role")
            if activity.timer is None:
                error(activity.id, "human task must declare a timer policy")
            for field in activity.form:
                if field not in declared:
                    error(activity.id, f"form field {field!r} is not a declared variable")
        if activity.kind is ActivityKind.AUTOMATED:
            if not activity.connector:
                error(activity.id, "automated activity must name a connector")
            elif activity.connector not in known_connectors:
                error(activity.id, f"unregistered connector {activity.connector!r}")
        if activity.kind is ActivityKind.DECISION:
            if len(outgoing) < 2:
                error(activity.id, "decision needs at least 2 outgoing transitions")
            for tr in outgoing:
                if tr.guard is None:
                    error(f"{tr.from_id}->{tr.to_id}", "decision transition needs a guard")
        elif len([t for t in outgoing if t.guard is None]) > 1:
            warning(activity.id, "multiple unguarded outgoing transitions activate in parallel")

    start_ids = [a.id for a in definition.activities if a.kind is ActivityKind.START]
    end_ids = {a.id for a in definition.activities if a.kind is ActivityKind.END}
    if start_ids:
        reachable = _closure(start_ids, _forward_edges(definition))
        for activity in definition.activities:
            if activity.id not in reachable:
                error(activity.id, "unreachable activity (no path from start)")
        completes = _closure(sorted(end_ids), _reverse_edges(definition))
        for activity in definition.activities:
            if activity.id in reachable and activity.id not in completes:
                error(activity.id, "no end activity reachable from here")

    return ValidationReport(tuple(diags))


def _literal_matches(var_type: VarType, literal: object) -> bool:
    if isinstance(literal, bool):
        return var_type is VarType.BOOL
    if isinstance(literal, int):
        return var_type is VarType.INT
    return var_type is VarType.STRING


def _literal_type(literal: object) -> str:
    if isinstance(literal, bool):
        return "bool"
    if isinstance(literal, int):
        return "int"
    return "string"


def _forward_edges(definition: ProcessDefinition) -> dict[str, list[str]]:
    edges: dict[str, list[str]] = {a.id: [] for a in definition.activities}
    for tr in definition.transitions:
        if tr.from_id in edges and tr.to_id in edges:
            edges[tr.from_id].append(tr.to_id)
    return edges


def _reverse_edges(definition: ProcessDefinition) -> dict[str, list[str]]:
    edges: dict[str, list[str]] = {a.id: [] for a in definition.activities}
    for tr in definition.transitions:
        if tr.from_id in edges and tr.to_id in edges:
            edges[tr.to_id].append(tr.from_id)
    return edges


def _closure(seeds: Iterable[str], edges: dict[str, list[str]]) -> set[str]:
    seen: set[str] = set()
    queue = deque(seeds)
    while queue:
        node = queue.popleft()
        if node in seen:
            continue
        seen.add(node)
        queue.extend(edges.get(node, ()))
    return seen
