"""Guard expressions for routing decisions.

A guard is a conjunction of comparisons between one instance variable and one
literal: ``amount <= 50000 and category == "license"``.  Evaluation is total:
a variable missing from the map raises, it never silently reads as false.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from civicflow.errors import GuardTypeError, ParseError, UnboundVariable

Scalar = str | int | bool

OPERATORS = ("==", "!=", "<=", ">=", "<", ">")
ORDERING_OPS = ("<=", ">=", "<", ">")

_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<op>==|!=|<=|>=|<|>)
      | (?P<and>\band\b)
      | (?P<bool>\btrue\b|\bfalse\b)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<int>-?[0-9]+)
      | (?P<str>"(?:[^"\\]|\\.)*")
    )""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class Comparison:
    variable: str
    op: str
    literal: Scalar

    def render(self) -> str:
        return f"{self.variable} {self.op} {render_literal(self.literal)}"


@dataclass(frozen=True)
class Guard:
    """Conjunction of comparisons, evaluated left to right with short-circuit."""

    comparisons: tuple[Comparison, ...]

    def render(self) -> str:
        return " and ".join(c.render() for c in self.comparisons)

    @property
    def variables(self) -> set[str]:
        return {c.variable for c in self.comparisons}


def render_literal(value: Scalar) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def _tokenize(text: str) -> list[tuple[str, object]]:
    tokens: list[tuple[str, object]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise ParseError(f"unexpected character {text[pos:].strip()[0]!r} in guard {text!r}")
            break
        pos = m.end()
        if m.group("op"):
            tokens.append(("op", m.group("op")))
        elif m.group("and"):
            tokens.append(("and", "and"))
        elif m.group("bool"):
            tokens.append(("literal", m.group("bool") == "true"))
        elif m.group("ident"):
            tokens.append(("ident", m.group("ident")))
        elif m.group("int"):
            tokens.append(("literal", int(m.group("int"))))
        elif m.group("str"):
            raw = m.group("str")[1:-1]
            tokens.append(("literal", raw.replace('\\"', '"').replace("\\\\", "\\")))
    return tokens


def parse_guard(text: str) -> Guard:
    """Parse ``var op literal [and ...]`` into a Guard."""
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty guard expression")
    comparisons: list[Comparison] = []
    i = 0
    while True:
        if len(tokens) - i < 3:
            raise ParseError(f"incomplete comparison in guard {text!r}")
        kind, value = tokens[i]
        if kind != "ident":
            raise ParseError(f"expected variable name in guard {text!r}")
        op_kind, op = tokens[i + 1]
        if op_kind != "op":
            raise ParseError(f"expected comparison operator after {value!r} in guard {text!r}")
        lit_kind, literal = tokens[i + 2]
        if lit_kind != "literal":
            raise ParseError(f"expected literal after operator in guard {text!r}")
        if op in ORDERING_OPS and not _is_plain_int(literal):
            raise ParseError(f"operator {op} only applies to integer literals in guard {text!r}")
        comparisons.append(Comparison(str(value), str(op), literal))  # type: ignore[arg-type]
        i += 3
        if i == len(tokens):
            break
        kind, _ = tokens[i]
        if kind != "and":
            raise ParseError(f"expected 'and' between comparisons in guard {text!r}")
        i += 1
        if i == len(tokens):
            raise ParseError(f"dangling 'and' in guard {text!r}")
    return Guard(tuple(comparisons))


def _is_plain_int(value: object) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def evaluate_guard(guard: Guard, variables: dict[str, Scalar]) -> bool:
    """Evaluate a guard against instance variables; missing variables raise."""
    for comp in guard.comparisons:
        if comp.variable not in variables:
            raise UnboundVariable(f"guard references unbound variable {comp.variable!r}")
        actual = variables[comp.variable]
        if not _compatible(actual, comp.literal):
            raise GuardTypeError(
                f"variable {comp.variable!r} has type {type(actual).__name__}, "
                f"guard compares against {type(comp.literal).__name__}"
            )
        if comp.op in ORDERING_OPS and not _is_plain_int(actual):
            raise GuardTypeError(f"operator {comp.op} needs an integer variable, got {comp.variable!r}")
        if not _apply(comp.op, actual, comp.literal):
            return False
    return True


def _compatible(a: Scalar, b: Scalar) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool)
    return type(a) is type(b)


def _apply(op: str, a: Scalar, b: Scalar) -> bool:
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b  # type: ignore[operator]
    if op == "<=":
        return a <= b  # type: ignore[operator]
    if op == ">":
        return a > b  # type: ignore[operator]
    return a >= b  # type: ignore[operator]
