"""Operator CLI: deployment, supervision, and worklist operations over HTTP.

Every command maps one-to-one onto a facade endpoint and exits nonzero with
the server's error code on failure.  ``validate`` is the exception: it runs
offline against the bundled connector names, no server needed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

from civicflow.errors import ParseError
from civicflow.gateway import BILLING_CONNECTOR, NOTICE_CONNECTOR
from civicflow.model.parser import parse_definition
from civicflow.model.validate import validate as validate_definition

DEFAULT_SERVER = "http://127.0.0.1:8571"


def parse_value(text: str):
    """CLI variable values: integer, true/false, otherwise string."""
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        return int(text)
    except ValueError:
        return text


def parse_pairs(pairs: tuple[str, ...]) -> dict:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise click.UsageError(f"expected key=value, got {pair!r}")
        out[key] = parse_value(value)
    return out


class Client:
    def __init__(self, server: str, token: str | None, user: str | None, secret: str | None):
        self.http = httpx.Client(base_url=server, timeout=30.0)
        self.token = token
        if self.token is None and user:
            response = self.http.post("/auth/login", json={"id": user, "secret": secret or ""})
            self._check(response)
            self.token = response.json()["token"]

    def request(self, method: str, path: str, **kwargs):
        headers = kwargs.pop("headers", {})
        if self.token:
            headers["X-Auth-Token"] = self.token
        response = self.http.request(method, path, headers=headers, **kwargs)
        self._check(response)
        if response.content:
            return response.json()
        return None

    @staticmethod
    def _check(response: httpx.Response) -> None:
        if response.status_code >= 400:
            try:
                body = response.json()
                code = body.get("error", str(response.status_code))
                message = body.get("message", body.get("detail", ""))
            except Exception:
                code, message = str(response.status_code), response.text
            click.echo(f"error {code}: {message}", err=True)
            sys.exit(1)


pass_client = click.make_pass_decorator(Client)


@click.group()
@click.option("--server", envvar="CIVICFLOW_SERVER", default=DEFAULT_SERVER, show_default=True)
@click.option("--token", envvar="CIVICFLOW_TOKEN", default=None, help="Session token.")
@click.option("--user", "-u", envvar="CIVICFLOW_USER", default=None, help="Login id.")
@click.option("--secret", envvar="CIVICFLOW_SECRET", default=None, help="Login secret.")
@click.option("--json", "as_json", is_flag=True, help="Print raw JSON responses.")
@click.pass_context
def main(ctx, server, token, user, secret, as_json):
    """Workflow operations for public-service delivery."""
    ctx.obj = (server, token, user, secret)
    ctx.meta["as_json"] = as_json


def client_from(ctx) -> Client:
    server, token, user, secret = ctx.obj
    return Client(server, token, user, secret)


def emit(ctx, data, human: str | None = None) -> None:
    if ctx.meta.get("as_json"):
        click.echo(json.dumps(data, indent=2, default=str))
    elif human is not None:
        click.echo(human)
    else:
        click.echo(json.dumps(data, indent=2, default=str))


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--test-mode", is_flag=True, default=False)
@click.option("--static-dir", type=click.Path(exists=True), default=None, help="Serve UI assets from here.")
def serve(config, host, port, test_mode, static_dir):
    """Run the HTTP facade."""
    import uvicorn

    from civicflow.facade.api import create_app
    from civicflow.runtime import Runtime, RuntimeConfig

    cfg = RuntimeConfig.from_yaml(config) if config else RuntimeConfig()
    if test_mode:
        cfg.test_mode = True
    runtime = Runtime(cfg)
    app = create_app(runtime, static_dir=static_dir)
    uvicorn.run(
        app,
        host=host or cfg.listen_host,
        port=port or cfg.listen_port,
        log_level="warning",
    )


@main.command()
@click.argument("file", type=click.Path(exists=True))
@click.option("--connector", "connectors", multiple=True, help="Extra registered connector names.")
@click.pass_context
def validate(ctx, file, connectors):
    """Check a definition file offline; nonzero exit on any error diagnostic."""
    source = Path(file).read_text(encoding="utf-8")
    try:
        definition = parse_definition(source)
    except ParseError as exc:
        click.echo(f"error ParseError: {exc.message}", err=True)
        sys.exit(1)
    known = {BILLING_CONNECTOR, NOTICE_CONNECTOR, *connectors}
    report = validate_definition(definition, known)
    for diag in report.diagnostics:
        click.echo(f"{diag.severity.value}: {diag.locus}: {diag.message}")
    if not report.ok:
        click.echo("error InvalidDefinition: validation failed", err=True)
        sys.exit(1)
    click.echo(f"ok: {definition.id} v{definition.version} ({len(definition.activities)} activities)")


@main.command()
@click.argument("file", type=click.Path(exists=True))
@click.pass_context
def deploy(ctx, file):
    """Deploy a .wfd definition file to the server."""
    client = client_from(ctx)
    source = Path(file).read_text(encoding="utf-8")
    data = client.request(
        "POST", "/definitions", content=source.encode("utf-8"),
        headers={"Content-Type": "text/plain"},
    )
    emit(ctx, data, f"deployed {data['id']} v{data['version']}")


@main.command()
@click.argument("definition")
@click.option("--var", "variables", multiple=True, help="Start variable as key=value.")
@click.option("--version", type=int, default=None)
@click.pass_context
def start(ctx, definition, variables, version):
    """Start an instance of a deployed definition."""
    client = client_from(ctx)
    data = client.request(
        "POST",
        "/instances",
        json={"definition": definition, "version": version, "variables": parse_pairs(variables)},
    )
    emit(ctx, data, f"started {data['id']} ({data['state']})")


@main.command()
@click.pass_context
def worklist(ctx):
    """List tasks visible to the logged-in principal."""
    client = client_from(ctx)
    data = client.request("GET", "/worklist")
    lines = [
        f"{t['id']}  {t['activity']}  [{t['state']}]  role={t['role']}  deadline={t['deadline']}"
        for t in data
    ]
    emit(ctx, data, "\n".join(lines) if lines else "(empty)")


@main.command()
@click.argument("task")
@click.pass_context
def claim(ctx, task):
    """Claim a pending task."""
    client = client_from(ctx)
    data = client.request("POST", f"/tasks/{task}/claim")
    emit(ctx, data, f"claimed {data['id']} input={data['input']}")


@main.command()
@click.argument("task")
@click.option("--out", "outputs", multiple=True, help="Output field as key=value.")
@click.pass_context
def complete(ctx, task, outputs):
    """Complete a claimed task with its output data."""
    client = client_from(ctx)
    data = client.request("POST", f"/tasks/{task}/complete", json={"output": parse_pairs(outputs)})
    emit(ctx, data, f"completed {data['id']}")


@main.command()
@click.argument("task")
@click.option("--fault", required=True)
@click.pass_context
def fail(ctx, task, fault):
    """Fail a claimed task with a fault message."""
    client = client_from(ctx)
    data = client.request("POST", f"/tasks/{task}/fail", json={"fault": fault})
    emit(ctx, data, f"failed {data['id']}: {data['fault']}")


@main.command()
@click.argument("task")
@click.option("--to", "target", required=True)
@click.pass_context
def delegate(ctx, task, target):
    """Delegate a claimed task to another eligible principal."""
    client = client_from(ctx)
    data = client.request("POST", f"/tasks/{task}/delegate", json={"to": target})
    emit(ctx, data, f"delegated {data['id']} to {data['assignee']}")


@main.command()
@click.argument("task")
@click.pass_context
def renew(ctx, task):
    """Consume one renewal to extend a task deadline."""
    client = client_from(ctx)
    data = client.request("POST", f"/tasks/{task}/renew")
    emit(ctx, data, f"renewed {data['id']} until {data['deadline']}")


@main.command()
@click.argument("instance")
@click.pass_context
def events(ctx, instance):
    """Print the event history of an instance."""
    client = client_from(ctx)
    data = client.request("GET", f"/instances/{instance}/events")
    lines = [f"{e['seq']:>5}  {e['at']:>12}  {e['kind']:<20}  {e['actor']}" for e in data]
    emit(ctx, data, "\n".join(lines) if lines else "(no events)")


@main.command()
@click.pass_context
def snapshot(ctx):
    """Supervisor dashboard counts and overdue tasks."""
    client = client_from(ctx)
    data = client.request("GET", "/admin/snapshot")
    emit(ctx, data)


@main.command()
@click.argument("instance")
@click.option("--reason", default="")
@click.pass_context
def terminate(ctx, instance, reason):
    """Terminate a running instance (supervise privilege)."""
    client = client_from(ctx)
    data = client.request("POST", f"/admin/instances/{instance}/terminate", json={"reason": reason})
    emit(ctx, data, f"terminated {data['id']}")


@main.group()
def user():
    """User administration."""


@user.command("add")
@click.argument("principal_id")
@click.option("--name", required=True)
@click.option("--kind", default="officer", type=click.Choice(["citizen", "officer", "system"]))
@click.option("--secret", required=True)
@click.pass_context
def user_add(ctx, principal_id, name, kind, secret):
    """Register a principal (manage-users privilege)."""
    client = client_from(ctx.parent)
    data = client.request(
        "POST",
        "/admin/users",
        json={"id": principal_id, "name": name, "kind": kind, "secret": secret},
    )
    emit(ctx.parent, data, f"added {data['id']}")


@user.command("role")
@click.argument("principal_id")
@click.argument("role")
@click.option("--revoke", is_flag=True, default=False)
@click.pass_context
def user_role(ctx, principal_id, role, revoke):
    """Grant or revoke a role membership."""
    client = client_from(ctx.parent)
    if revoke:
        data = client.request("DELETE", f"/admin/users/{principal_id}/roles/{role}")
    else:
        data = client.request("POST", f"/admin/users/{principal_id}/roles", json={"role": role})
    emit(ctx.parent, data, f"{principal_id} roles: {', '.join(data['roles'])}")


@main.command()
@click.option("--channel", required=True)
@click.option("--instance", default=None)
@click.option("--kind", "kinds", multiple=True)
@click.option("--role", default=None)
@click.pass_context
def subscribe(ctx, channel, instance, kinds, role):
    """Subscribe to runtime notifications."""
    client = client_from(ctx)
    data = client.request(
        "POST",
        "/subscriptions",
        json={
            "channel": channel,
            "instance": instance,
            "kinds": list(kinds) or None,
            "role": role,
        },
    )
    emit(ctx, data, f"subscribed {data['id']} via {data['channel']}")


@main.command()
@click.pass_context
def outbox(ctx):
    """Delivered notifications for the logged-in principal."""
    client = client_from(ctx)
    data = client.request("GET", "/outbox")
    lines = [f"{m['event_seq']:>5}  {m['rendered']}" for m in data]
    emit(ctx, data, "\n".join(lines) if lines else "(empty)")


@main.command()
@click.argument("seconds", type=float)
@click.pass_context
def tick(ctx, seconds):
    """Advance the simulated clock (test-mode servers only)."""
    client = client_from(ctx)
    data = client.request("POST", "/admin/tick", json={"seconds": seconds})
    emit(ctx, data, f"now={data['now']} firings={len(data['firings'])}")


if __name__ == "__main__":
    main()
