"""Notification dispatch over pluggable channels.

Stakeholders subscribe with a filter (instance, event kinds, role) and a
channel.  Each matching event produces exactly one message per subscription,
delivered in event order; webhook failures are retried a fixed number of
times, then the message is dead-lettered with an alert in the tracking log.

Message texts come from per-locale template sets; only the default locale
ships, but registering another set is one dict away.
"""

from __future__ import annotations

import json
import logging
import threading
import urllib.request
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from civicflow.clock import Clock
from civicflow.errors import (
    DuplicateChannel,
    EmptyFilter,
    PrivilegeDenied,
    Unauthenticated,
    UnknownChannel,
)
from civicflow.events import EventKind, EventRecord
from civicflow.ids import IdSource
from civicflow.tracking import EventLog

logger = logging.getLogger(__name__)

DEFAULT_LOCALE = "en"
DEFAULT_MAX_ATTEMPTS = 3

TEMPLATES: dict[str, dict[str, str]] = {
    "en": {
        "instance-started": "Request {instance} opened for {definition} v{version}",
        "activity-activated": "Request {instance}: step {activity} started",
        "task-created": "Request {instance}: task {activity} waiting for a {role}",
        "task-claimed": "Request {instance}: task {task} taken up by {actor}",
        "task-completed": "Request {instance}: task {task} completed by {actor}",
        "task-failed": "Request {instance}: task {task} failed ({fault})",
        "task-delegated": "Request {instance}: task {task} handed from {from} to {to}",
        "task-renewed": "Request {instance}: task {task} deadline extended",
        "task-escalated": "Request {instance}: task {task} escalated to role {role}",
        "connector-invoked": "Request {instance}: external system {connector} processed {activity}",
        "connector-failed": "Request {instance}: external system {connector} failed ({error})",
        "instance-completed": "Request {instance} completed",
        "instance-terminated": "Request {instance} terminated ({reason})",
        "alert": "Attention needed on request {instance}: {reason}",
    }
}


class _Defaulting(dict):
    def __missing__(self, key: str) -> str:
        return "?"


def render_message(event: EventRecord, locale: str = DEFAULT_LOCALE) -> str:
    templates = TEMPLATES.get(locale, TEMPLATES[DEFAULT_LOCALE])
    template = templates.get(event.kind.value, "{kind} on request {instance}")
    context = _Defaulting(
        instance=event.instance,
        actor=event.actor,
        kind=event.kind.value,
        task=event.task or "?",
    )
    context.update(event.payload)
    return template.format_map(context)


class DeliveryStatus(str, Enum):
    QUEUED = "queued"
    DELIVERED = "delivered"
    DEAD = "dead"


@dataclass(frozen=True)
class NotificationFilter:
    instance: str | None = None
    kinds: frozenset[EventKind] | None = None
    role: str | None = None

    @property
    def empty(self) -> bool:
        return self.instance is None and self.kinds is None and self.role is None

    def matches(self, event: EventRecord) -> bool:
        if self.instance is not None and event.instance != self.instance:
            return False
        if self.kinds is not None and event.kind not in self.kinds:
            return False
        if self.role is not None and event.payload.get("role") != self.role:
            return False
        return True


@dataclass
class Subscription:
    id: str
    principal: str
    filter: NotificationFilter
    channel: str
    since_seq: int


@dataclass
class NotificationMessage:
    id: str
    subscription: str
    principal: str
    event_seq: int
    kind: EventKind
    rendered: str
    status: DeliveryStatus
    attempts: int = 0


class ConsoleChannel:
    """Logs the rendered text; always succeeds."""

    name = "console"

    def deliver(self, message: NotificationMessage, event: EventRecord) -> bool:
        logger.info("notify %s: %s", message.principal, message.rendered)
        return True


class OutboxFileChannel:
    """Appends one line per message to a file; always succeeds."""

    name = "outbox-file"

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path else None
        self._lock = threading.Lock()

    def deliver(self, message: NotificationMessage, event: EventRecord) -> bool:
        if self._path is not None:
            with self._lock, self._path.open("a", encoding="utf-8") as sink:
                sink.write(f"{message.principal}\t{message.event_seq}\t{message.rendered}\n")
        return True


def _http_post(url: str, body: dict) -> bool:
    data = json.dumps(body).encode("utf-8")
    request = urllib.request.Request(
        url, data=data, headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(request, timeout=5) as response:
            return 200 <= response.status < 300
    except Exception:
        return False


class WebhookChannel:
    """POSTs rendered text plus event seq/kind to a configured URL; may fail."""

    name = "webhook"

    def __init__(self, url: str, transport: Callable[[str, dict], bool] = _http_post):
        self.url = url
        self._transport = transport

    def deliver(self, message: NotificationMessage, event: EventRecord) -> bool:
        return self._transport(
            self.url,
            {
                "text": message.rendered,
                "event_seq": message.event_seq,
                "kind": message.kind.value,
                "instance": event.instance,
            },
        )


class NotificationService:
    def __init__(
        self,
        log: EventLog,
        clock: Clock,
        ids: IdSource,
        principal_exists: Callable[[str], bool],
        initiator_of: Callable[[str], str | None] | None = None,
        sees_all: Callable[[str], bool] | None = None,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        retry_interval: float = 0.0,
        locale: str = DEFAULT_LOCALE,
    ):
        self._log = log
        self._clock = clock
        self._ids = ids
        self._principal_exists = principal_exists
        self._initiator_of = initiator_of
        self._sees_all = sees_all
        self._max_attempts = max_attempts
        self._retry_interval = retry_interval
        self._locale = locale
        self._lock = threading.RLock()
        self._channels: dict[str, object] = {}
        self._subscriptions: dict[str, Subscription] = {}
        self._messages: list[NotificationMessage] = []
        self._by_seq: dict[int, list[NotificationMessage]] = {}
        self._dispatched_seq = 0
        self._pending_alerts: list[tuple[str, dict]] = []

    # -- channels ---------------------------------------------------------------

    def register_channel(self, channel) -> None:
        with self._lock:
            if channel.name in self._channels:
                raise DuplicateChannel(f"channel {channel.name!r} already registered")
            self._channels[channel.name] = channel

    def channel_names(self) -> set[str]:
        with self._lock:
            return set(self._channels)

    # -- subscriptions -------------------------------------------------------------

    def subscribe(
        self, principal: str, notification_filter: NotificationFilter, channel: str
    ) -> Subscription:
        """Register interest in events.

        A subscription naming one instance is backfilled with that instance's
        history (a citizen always sees their request from instance-started
        on); kind/role subscriptions only receive subsequent events.
        """
        if not self._principal_exists(principal):
            raise Unauthenticated(f"unknown principal {principal!r}")
        if notification_filter.empty:
            raise EmptyFilter("subscription filter must name an instance, kinds, or a role")
        with self._lock:
            if channel not in self._channels:
                raise UnknownChannel(f"channel {channel!r} is not registered")
        if (
            notification_filter.instance is not None
            and self._initiator_of is not None
            and not (self._sees_all and self._sees_all(principal))
            and self._initiator_of(notification_filter.instance) != principal
        ):
            raise PrivilegeDenied(
                f"{principal!r} may not subscribe to instance {notification_filter.instance}"
            )
        scoped = notification_filter.instance is not None
        with self._lock:
            subscription = Subscription(
                id=self._ids.new("sub"),
                principal=principal,
                filter=notification_filter,
                channel=channel,
                since_seq=0 if scoped else self._log.last_seq(),
            )
            self._subscriptions[subscription.id] = subscription
            if scoped:
                # deliver the already-dispatched part of the history now; the
                # rest flows through dispatch in order
                for event in self._log.records(instance=notification_filter.instance):
                    if event.seq <= self._dispatched_seq and subscription.filter.matches(event):
                        self._notify(subscription, event)
        return subscription

    def subscriptions_of(self, principal: str) -> list[Subscription]:
        with self._lock:
            return [s for s in self._subscriptions.values() if s.principal == principal]

    # -- dispatch ---------------------------------------------------------------------

    def dispatch(self, event: EventRecord) -> list[NotificationMessage]:
        """Deliver an event to every matching subscription, exactly once each.

        Internally drains the log in seq order up to this event, so dispatch
        order per subscription follows event order even under concurrency.
        """
        with self._lock:
            while self._dispatched_seq < event.seq:
                batch = self._log.records(since_seq=self._dispatched_seq)
                if not batch:
                    break
                for pending in batch:
                    if pending.seq <= self._dispatched_seq:
                        continue
                    self._dispatched_seq = pending.seq
                    self._dispatch_one(pending)
            while self._pending_alerts:
                instance, payload = self._pending_alerts.pop(0)
                self._log.record(
                    EventKind.ALERT,
                    instance=instance,
                    actor="system",
                    at=self._clock.now(),
                    payload=payload,
                )
            return list(self._by_seq.get(event.seq, ()))

    def _dispatch_one(self, event: EventRecord) -> None:
        for subscription in list(self._subscriptions.values()):
            if event.seq <= subscription.since_seq:
                continue
            if not subscription.filter.matches(event):
                continue
            self._notify(subscription, event)

    def _notify(self, subscription: Subscription, event: EventRecord) -> None:
        message = NotificationMessage(
            id=self._ids.new("msg"),
            subscription=subscription.id,
            principal=subscription.principal,
            event_seq=event.seq,
            kind=event.kind,
            rendered=render_message(event, self._locale),
            status=DeliveryStatus.QUEUED,
        )
        self._messages.append(message)
        self._by_seq.setdefault(event.seq, []).append(message)
        self._deliver(message, event, self._channels[subscription.channel])

    def _deliver(self, message: NotificationMessage, event: EventRecord, channel) -> None:
        while message.attempts < self._max_attempts:
            message.attempts += 1
            ok = False
            try:
                ok = channel.deliver(message, event)
            except Exception:
                logger.exception("channel %s raised while delivering", channel.name)
            if ok:
                message.status = DeliveryStatus.DELIVERED
                return
            if message.attempts < self._max_attempts and self._retry_interval > 0:
                self._clock.sleep(self._retry_interval)
        message.status = DeliveryStatus.DEAD
        if event.kind is not EventKind.ALERT:
            # alerts about alert delivery would recurse forever; the append is
            # deferred until the current drain finishes to preserve ordering
            self._pending_alerts.append(
                (
                    event.instance,
                    {
                        "reason": "notification-dead",
                        "subscription": message.subscription,
                        "message": message.id,
                        "event_seq": message.event_seq,
                    },
                )
            )

    # -- observation --------------------------------------------------------------------

    def outbox(self, principal: str) -> list[NotificationMessage]:
        """Delivered messages for the principal's subscriptions, in delivery order."""
        if not self._principal_exists(principal):
            raise Unauthenticated(f"unknown principal {principal!r}")
        with self._lock:
            return [
                m
                for m in self._messages
                if m.principal == principal and m.status is DeliveryStatus.DELIVERED
            ]

    def all_messages(self) -> list[NotificationMessage]:
        with self._lock:
            return list(self._messages)
