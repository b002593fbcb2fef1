"""Shared fixtures plus the acceptance-summary reporter."""

from __future__ import annotations

import pytest

from civicflow.identity import PrincipalKind
from civicflow.runtime import Runtime, RuntimeConfig

_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        _acceptance_results[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_results.items():
        terminalreporter.write_line(f"{outcome}  {name}")


@pytest.fixture
def rt():
    runtime = Runtime(RuntimeConfig(test_mode=True))
    yield runtime
    runtime.close()


CAST = [
    ("alice", "Alice Njeri", PrincipalKind.CITIZEN, ["citizen"]),
    ("grace", "Grace Wanjiku", PrincipalKind.OFFICER, ["clerk"]),
    ("daniel", "Daniel Otieno", PrincipalKind.OFFICER, ["clerk"]),
    ("amina", "Amina Hassan", PrincipalKind.OFFICER, ["supervisor"]),
    ("peter", "Peter Kamau", PrincipalKind.OFFICER, ["manager"]),
    ("janet", "Janet Achieng", PrincipalKind.OFFICER, ["manager"]),
    ("noro", "No Roles", PrincipalKind.OFFICER, []),
]


def register_cast(runtime: Runtime, secret: str = "pw") -> None:
    """Standard set of principals used across scenario tests."""
    runtime.identity.ensure_role("clerk")
    for pid, name, kind, roles in CAST:
        runtime.identity.register("admin", pid, name, kind, secret)
        for role in roles:
            runtime.identity.assign_role("admin", pid, role)


@pytest.fixture
def staffed(rt):
    register_cast(rt)
    return rt
