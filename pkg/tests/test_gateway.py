"""Connector registry idempotency and the mock government clients."""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from civicflow.clock import SimulatedClock
from civicflow.errors import ConnectorFailure, DuplicateConnector, UnknownOfficer
from civicflow.events import EventKind
from civicflow.gateway import (
    BillingClient,
    ConnectorRegistry,
    HttpStaffDirectory,
    StaffDirectory,
)
from civicflow.runtime import fixture_path
from civicflow.tracking import EventLog


@pytest.fixture
def registry():
    log = EventLog()
    reg = ConnectorRegistry(log, SimulatedClock())
    reg.register(BillingClient())
    return reg, log


def test_duplicate_connector_rejected(registry):
    reg, _ = registry
    with pytest.raises(DuplicateConnector):
        reg.register(BillingClient())


def test_invoke_records_event_and_bills_once(registry):
    reg, log = registry
    out = reg.invoke("laifoms", "wf-1", "pay", {"fee_minor": 5000})
    assert out["amount_minor"] == 5000
    events = log.records(kind=EventKind.CONNECTOR_INVOKED)
    assert len(events) == 1
    assert events[0].payload["connector"] == "laifoms"


def test_repeat_invoke_is_deduplicated(registry):
    reg, log = registry
    first = reg.invoke("laifoms", "wf-1", "pay", {"fee_minor": 5000})
    second = reg.invoke("laifoms", "wf-1", "pay", {"fee_minor": 9999})
    assert first == second  # stored result, no second side effect
    billing = reg.get("laifoms")
    assert len(billing.records) == 1
    assert billing.records["wf-1/pay"].amount == 5000
    events = log.records(kind=EventKind.CONNECTOR_INVOKED)
    assert len(events) == 2
    assert events[1].payload.get("deduplicated") is True


def test_distinct_keys_bill_separately(registry):
    reg, _ = registry
    reg.invoke("laifoms", "wf-1", "pay", {"fee_minor": 100})
    reg.invoke("laifoms", "wf-2", "pay", {"fee_minor": 200})
    assert len(reg.get("laifoms").records) == 2


def test_concurrent_duplicate_invokes_single_side_effect(registry):
    reg, _ = registry
    barrier = threading.Barrier(6)

    def call():
        barrier.wait()
        reg.invoke("laifoms", "wf-9", "pay", {"fee_minor": 777})

    threads = [threading.Thread(target=call) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(reg.get("laifoms").records) == 1


def test_failure_logs_event_and_raises(registry):
    reg, log = registry
    with pytest.raises(ConnectorFailure):
        reg.invoke("laifoms", "wf-1", "pay", {})  # no amount variable
    failures = log.records(kind=EventKind.CONNECTOR_FAILED)
    assert len(failures) == 1
    assert failures[0].payload["attempt"] == 1


def test_staff_directory_from_fixture():
    staff = StaffDirectory.from_file(fixture_path("staff.tsv"))
    record = staff.lookup_officer("OFF-001")
    assert record.name == "Grace Wanjiku"
    assert record.role == "clerk"
    with pytest.raises(UnknownOfficer):
        staff.lookup_officer("OFF-999")


def test_staff_directory_reload_is_identical():
    first = StaffDirectory.from_file(fixture_path("staff.tsv"))
    second = StaffDirectory.from_file(fixture_path("staff.tsv"))
    assert first.lookup_officer("OFF-003") == second.lookup_officer("OFF-003")


class _StaffStub(BaseHTTPRequestHandler):
    def do_GET(self):
        officer_id = self.path.rsplit("/", 1)[-1]
        if officer_id == "OFF-100":
            body = json.dumps(
                {
                    "officer_id": "OFF-100",
                    "name": "Stub Officer",
                    "role": "clerk",
                    "department": "Stubs",
                }
            ).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(body)
        else:
            self.send_response(404)
            self.end_headers()

    def log_message(self, *args):
        pass


def test_http_staff_directory_stub_mode():
    server = HTTPServer(("127.0.0.1", 0), _StaffStub)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        directory = HttpStaffDirectory(f"http://127.0.0.1:{server.server_port}")
        record = directory.lookup_officer("OFF-100")
        assert record.name == "Stub Officer"
        with pytest.raises(UnknownOfficer):
            directory.lookup_officer("OFF-404")
    finally:
        server.shutdown()
        thread.join()
