"""Parser and canonical serializer for the ``.wfd`` definition language.

The format is line-oriented: a ``process`` header, variable declarations,
one line per activity, and ``flow`` lines for transitions.  ``#`` starts a
comment.  The full grammar ships as EBNF in docs/definition-language.md and
is frozen by golden-file tests.

Parsing is purely structural; semantic checks (reachability, undeclared
guard variables, duplicate ids, ...) live in :mod:`civicflow.model.validate`.
"""

from __future__ import annotations

import re

from civicflow.errors import ParseError
from civicflow.model.guards import Guard, parse_guard
from civicflow.model.types import (
    ActivityDef,
    ActivityKind,
    ParsedDuration,
    ProcessDefinition,
    TimerPolicy,
    TransitionDef,
    VariableDecl,
    VarType,
)

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")
_INT_RE = re.compile(r"[0-9]+")
_DURATION_RE = re.compile(r"([0-9]+)([mhd])")
_STRING_RE = re.compile(r'"(?:[^"\\]|\\.)*"')


class _Cursor:
    """Single-line token cursor with position-aware errors."""

    def __init__(self, text: str, line_no: int):
        self.text = text
        self.line_no = line_no
        self.pos = 0

    def fail(self, expected: str) -> ParseError:
        err = ParseError(f"line {self.line_no}, col {self.pos + 1}: expected {expected}")
        err.line = self.line_no
        err.column = self.pos + 1
        return err

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def take(self, pattern: re.Pattern, expected: str) -> str:
        self.skip_ws()
        m = pattern.match(self.text, self.pos)
        if not m:
            raise self.fail(expected)
        self.pos = m.end()
        return m.group(0)

    def take_literal(self, literal: str) -> None:
        self.skip_ws()
        if not self.text.startswith(literal, self.pos):
            raise self.fail(f"'{literal}'")
        self.pos += len(literal)

    def try_literal(self, literal: str) -> bool:
        self.skip_ws()
        if self.text.startswith(literal, self.pos):
            self.pos += len(literal)
            return True
        return False

    def ident(self, expected: str = "identifier") -> str:
        return self.take(_IDENT_RE, expected)

    def rest(self) -> str:
        self.skip_ws()
        out = self.text[self.pos :]
        self.pos = len(self.text)
        return out

    def expect_end(self) -> None:
        if not self.at_end():
            raise self.fail("end of line")


def _strip_comment(line: str) -> str:
    # '#' inside a quoted string does not start a comment
    out = []
    in_string = False
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == '"' and (i == 0 or line[i - 1] != "\\"):
            in_string = not in_string
        if ch == "#" and not in_string:
            break
        out.append(ch)
        i += 1
    return "".join(out).rstrip()


def parse_definition(source: str) -> ProcessDefinition:
    """Parse a ``.wfd`` document into a ProcessDefinition.

    Raises ParseError (with ``line`` and ``column`` attributes) on malformed
    input, a missing/duplicate ``process`` header, zero start activities, or
    zero end activities.
    """
    header: tuple[str, int, str] | None = None
    variables: list[VariableDecl] = []
    activities: list[ActivityDef] = []
    transitions: list[TransitionDef] = []
    var_names: set[str] = set()

    lines = source.split("\n")
    last_line = 0
    for line_no, raw in enumerate(lines, start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        last_line = line_no
        cur = _Cursor(line, line_no)
        keyword = cur.ident("keyword (process/input/var/start/end/task/auto/decision/flow)")
        if keyword == "process":
            if header is not None:
                raise cur.fail("no second 'process' header")
            header = _parse_header(cur)
        elif header is None:
            cur.pos = 0
            raise cur.fail("'process' header before any other declaration")
        elif keyword in ("input", "var"):
            decl = _parse_variable(cur, required=keyword == "input")
            if decl.name in var_names:
                raise cur.fail(f"a new variable name ({decl.name!r} already declared)")
            var_names.add(decl.name)
            variables.append(decl)
        elif keyword == "start":
            activities.append(_parse_plain_activity(cur, ActivityKind.START))
        elif keyword == "end":
            activities.append(_parse_plain_activity(cur, ActivityKind.END))
        elif keyword == "task":
            activities.append(_parse_task(cur))
        elif keyword == "auto":
            activities.append(_parse_auto(cur))
        elif keyword == "decision":
            activities.append(_parse_plain_activity(cur, ActivityKind.DECISION, id_required=True))
        elif keyword == "flow":
            transitions.append(_parse_flow(cur))
        else:
            cur.pos = 0
            raise cur.fail("one of process/input/var/start/end/task/auto/decision/flow")

    if header is None:
        err = ParseError("line 1, col 1: expected 'process' header")
        err.line = 1
        err.column = 1
        raise err

    starts = [a for a in activities if a.kind is ActivityKind.START]
    ends = [a for a in activities if a.kind is ActivityKind.END]
    if len(starts) != 1:
        err = ParseError(
            f"line {last_line}, col 1: expected exactly one start activity, found {len(starts)}"
        )
        err.line = last_line
        err.column = 1
        raise err
    if not ends:
        err = ParseError(f"line {last_line}, col 1: expected at least one end activity")
        err.line = last_line
        err.column = 1
        raise err

    proc_id, version, name = header
    return ProcessDefinition(
        id=proc_id,
        version=version,
        name=name,
        variables=tuple(variables),
        activities=tuple(activities),
        transitions=tuple(transitions),
    )


def _parse_header(cur: _Cursor) -> tuple[str, int, str]:
    proc_id = cur.ident("process id")
    cur.take_literal("v")
    version = int(cur.take(_INT_RE, "version number after 'v'"))
    if version < 1:
        raise cur.fail("positive version number")
    quoted = cur.take(_STRING_RE, 'display name in double quotes')
    name = quoted[1:-1].replace('\\"', '"').replace("\\\\", "\\")
    cur.expect_end()
    return proc_id, version, name


def _parse_variable(cur: _Cursor, required: bool) -> VariableDecl:
    name = cur.take(re.compile(r"[A-Za-z_][A-Za-z0-9_]*"), "variable name")
    cur.take_literal(":")
    type_name = cur.ident("variable type (string/int/bool)")
    try:
        var_type = VarType(type_name)
    except ValueError:
        raise cur.fail("variable type (string/int/bool)") from None
    cur.expect_end()
    return VariableDecl(name=name, type=var_type, required=required)


def _parse_plain_activity(
    cur: _Cursor, kind: ActivityKind, id_required: bool = False
) -> ActivityDef:
    if cur.at_end():
        if id_required:
            raise cur.fail("activity id")
        activity_id = kind.value
    else:
        activity_id = cur.ident("activity id")
        cur.expect_end()
    return ActivityDef(id=activity_id, kind=kind)


def _parse_task(cur: _Cursor) -> ActivityDef:
    activity_id = cur.ident("task activity id")
    attrs = _parse_attrs(
        cur,
        required=("role", "expires", "escalate"),
        optional=("renewals", "extend", "form"),
    )
    expires = _duration(cur, attrs["expires"])
    renewals = int(attrs.get("renewals", "0"))
    if renewals > 0 and "extend" not in attrs:
        raise cur.fail("attribute extend=... when renewals > 0")
    extend = _duration(cur, attrs["extend"]) if "extend" in attrs else 0
    form = tuple(attrs["form"]) if "form" in attrs else ()
    timer = TimerPolicy(
        expires_after=expires,
        escalate_to=attrs["escalate"],
        max_renewals=renewals,
        renewal_extension=extend,
    )
    return ActivityDef(
        id=activity_id, kind=ActivityKind.HUMAN_TASK, role=attrs["role"], timer=timer, form=form
    )


def _parse_auto(cur: _Cursor) -> ActivityDef:
    activity_id = cur.ident("automated activity id")
    attrs = _parse_attrs(cur, required=("connector",), optional=())
    return ActivityDef(id=activity_id, kind=ActivityKind.AUTOMATED, connector=attrs["connector"])


def _parse_attrs(cur: _Cursor, required: tuple[str, ...], optional: tuple[str, ...]) -> dict:
    allowed = set(required) | set(optional)
    attrs: dict[str, object] = {}
    while not cur.at_end():
        key = cur.ident("attribute key")
        if key not in allowed:
            raise cur.fail(f"one of {sorted(allowed)} as attribute key")
        if key in attrs:
            raise cur.fail(f"attribute {key!r} only once")
        cur.take_literal("=")
        if key == "form":
            cur.take_literal("[")
            fields = [cur.take(re.compile(r"[A-Za-z_][A-Za-z0-9_]*"), "form field name")]
            while cur.try_literal(","):
                fields.append(cur.take(re.compile(r"[A-Za-z_][A-Za-z0-9_]*"), "form field name"))
            cur.take_literal("]")
            attrs[key] = fields
        elif key in ("expires", "extend"):
            attrs[key] = cur.take(_DURATION_RE, "duration like 30m, 4h or 3d")
        elif key == "renewals":
            attrs[key] = cur.take(_INT_RE, "non-negative renewal count")
        else:
            attrs[key] = cur.ident(f"value for {key}")
    missing = [k for k in required if k not in attrs]
    if missing:
        raise cur.fail(f"attribute {missing[0]}=...")
    return attrs


def _duration(cur: _Cursor, text: str) -> int:
    m = _DURATION_RE.fullmatch(text)
    if not m:
        raise cur.fail("duration like 30m, 4h or 3d")
    amount = int(m.group(1))
    if amount <= 0:
        raise cur.fail("positive duration")
    return ParsedDuration(amount, m.group(2)).seconds


def _parse_flow(cur: _Cursor) -> TransitionDef:
    from_id = cur.ident("source activity id")
    cur.take_literal("->")
    to_id = cur.ident("target activity id")
    guard: Guard | None = None
    if not cur.at_end():
        cur.take_literal("when")
        guard_text = cur.rest()
        if not guard_text:
            raise cur.fail("guard expression after 'when'")
        guard = parse_guard(guard_text)
    return TransitionDef(from_id=from_id, to_id=to_id, guard=guard)


def serialize(definition: ProcessDefinition) -> str:
    """Emit the canonical text form; parse(serialize(d)) is structurally d."""
    out: list[str] = []
    name = definition.name.replace("\\", "\\\\").replace('"', '\\"')
    out.append(f'process {definition.id} v{definition.version} "{name}"')

    if definition.variables:
        out.append("")
        for var in definition.variables:
            keyword = "input" if var.required else "var"
            out.append(f"{keyword} {var.name}: {var.type.value}")

    if definition.activities:
        out.append("")
        for activity in definition.activities:
            out.append(_render_activity(activity))

    if definition.transitions:
        out.append("")
        for tr in definition.transitions:
            line = f"flow {tr.from_id} -> {tr.to_id}"
            if tr.guard is not None:
                line += f" when {tr.guard.render()}"
            out.append(line)

    return "\n".join(out) + "\n"


def _render_activity(activity: ActivityDef) -> str:
    kind = activity.kind
    if kind in (ActivityKind.START, ActivityKind.END):
        if activity.id == kind.value:
            return kind.value
        return f"{kind.value} {activity.id}"
    if kind is ActivityKind.DECISION:
        return f"decision {activity.id}"
    if kind is ActivityKind.AUTOMATED:
        return f"auto {activity.id} connector={activity.connector}"
    parts = [f"task {activity.id}", f"role={activity.role}"]
    timer = activity.timer
    if timer is not None:
        parts.append(f"expires={ParsedDuration.from_seconds(timer.expires_after).render()}")
        parts.append(f"escalate={timer.escalate_to}")
        parts.append(f"renewals={timer.max_renewals}")
        if timer.renewal_extension > 0:
            parts.append(f"extend={ParsedDuration.from_seconds(timer.renewal_extension).render()}")
    if activity.form:
        parts.append("form=[" + ",".join(activity.form) + "]")
    return " ".join(parts)
