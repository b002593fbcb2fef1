"""Operator CLI against a live test-mode server, plus offline validate."""

import threading
import time

import pytest
import uvicorn
from click.testing import CliRunner

from civicflow.facade.api import create_app
from civicflow.facade.cli import main, parse_value
from civicflow.runtime import Runtime, RuntimeConfig, fixture_path

from tests.conftest import register_cast


class LiveServer:
    def __init__(self):
        self.runtime = Runtime(RuntimeConfig(test_mode=True))
        register_cast(self.runtime)
        app = create_app(self.runtime)
        config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)
        self.thread.start()
        deadline = time.time() + 10
        while not self.server.started:
            if time.time() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.01)
        port = self.server.servers[0].sockets[0].getsockname()[1]
        self.url = f"http://127.0.0.1:{port}"

    def stop(self):
        self.server.should_exit = True
        self.thread.join(timeout=5)
        self.runtime.close()


@pytest.fixture(scope="module")
def server():
    live = LiveServer()
    yield live
    live.stop()


def run_cli(server, user, *args):
    runner = CliRunner()
    secret = "change-me" if user == "admin" else "pw"
    result = runner.invoke(
        main, ["--server", server.url, "--user", user, "--secret", secret, *args]
    )
    return result


def test_parse_value_types():
    assert parse_value("5000") == 5000
    assert parse_value("true") is True
    assert parse_value("False") is False
    assert parse_value("chairs") == "chairs"


def test_validate_ok_offline():
    runner = CliRunner()
    result = runner.invoke(main, ["validate", str(fixture_path("license_renewal.wfd"))])
    assert result.exit_code == 0, result.output
    assert "ok: license_renewal v1" in result.output


def test_validate_broken_file_nonzero(tmp_path):
    broken = tmp_path / "broken.wfd"
    broken.write_text(
        'process broken v1 "Broken"\n'
        "start\n"
        "task orphan role=clerk expires=1d escalate=supervisor renewals=0\n"
        "end\n"
        "flow start -> end\n"
    )
    runner = CliRunner()
    result = runner.invoke(main, ["validate", str(broken)])
    assert result.exit_code == 1
    assert "unreachable" in result.output


def test_validate_parse_error_nonzero(tmp_path):
    bad = tmp_path / "bad.wfd"
    bad.write_text("this is not a definition")
    runner = CliRunner()
    result = runner.invoke(main, ["validate", str(bad)])
    assert result.exit_code == 1
    assert "ParseError" in result.output


def test_scripted_purchase_approval_run(server):
    result = run_cli(server, "admin", "deploy", str(fixture_path("purchase_approval.wfd")))
    assert result.exit_code == 0, result.output

    result = run_cli(
        server, "amina", "start", "purchase_approval",
        "--var", "item=chairs", "--var", "fee_minor=120000",
    )
    assert result.exit_code == 0, result.output

    result = run_cli(server, "amina", "worklist")
    assert result.exit_code == 0
    task_id = result.output.split()[0]
    assert task_id.startswith("task-")

    assert run_cli(server, "amina", "claim", task_id).exit_code == 0
    result = run_cli(server, "amina", "complete", task_id, "--out", "approved=true")
    assert result.exit_code == 0, result.output

    instance_id = server.runtime.engine.instances()[0].id
    result = run_cli(server, "amina", "events", instance_id)
    assert result.exit_code == 0
    assert "instance-completed" in result.output
    assert "connector-invoked" in result.output
    # billing went out exactly once
    assert len(server.runtime.billing.records) == 1


def test_snapshot_denied_for_citizen(server):
    result = run_cli(server, "alice", "snapshot")
    assert result.exit_code == 1
    assert "PrivilegeDenied" in result.output


def test_snapshot_for_supervisor(server):
    result = run_cli(server, "amina", "snapshot")
    assert result.exit_code == 0
    assert "open_tasks" in result.output


def test_user_add_and_role_commands(server):
    result = run_cli(
        server, "admin", "user", "add", "newbie", "--name", "New Person", "--secret", "np"
    )
    assert result.exit_code == 0, result.output
    result = run_cli(server, "admin", "user", "role", "newbie", "clerk")
    assert result.exit_code == 0
    assert "clerk" in result.output


def test_cli_error_prints_code_and_exits_nonzero(server):
    result = run_cli(server, "grace", "claim", "task-does-not-exist")
    assert result.exit_code == 1
    assert "UnknownTask" in result.output


def test_tick_command(server):
    result = run_cli(server, "admin", "tick", "3600")
    assert result.exit_code == 0
    assert "now=" in result.output
