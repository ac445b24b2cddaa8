"""Per-session event fan-out for the server-push channel.

Every session has an append-only backlog plus any number of live
subscriber queues. Subscribing atomically snapshots the backlog so a
subscriber sees every event exactly once, in publish order.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass, field


@dataclass
class Subscription:
    backlog: list[dict]
    live: "queue.Queue[dict]"

    def drain(self, timeout_s: float = 0.0) -> list[dict]:
        """Backlog plus whatever arrives within `timeout_s`."""
        events = list(self.backlog)
        self.backlog = []
        try:
            while True:
                events.append(self.live.get(timeout=timeout_s))
        except queue.Empty:
            return events


@dataclass
class _SessionChannel:
    backlog: list[dict] = field(default_factory=list)
    subscribers: list["queue.Queue[dict]"] = field(default_factory=list)


class EventBus:
    def __init__(self) -> None:
        self._channels: dict[str, _SessionChannel] = {}
        self._lock = threading.Lock()

    def publish(self, session_id: str, event: dict) -> None:
        with self._lock:
            channel = self._channels.setdefault(session_id, _SessionChannel())
            channel.backlog.append(event)
            subscribers = list(channel.subscribers)
        for sub in subscribers:
            sub.put(event)

    def subscribe(self, session_id: str) -> Subscription:
        live: "queue.Queue[dict]" = queue.Queue()
        with self._lock:
            channel = self._channels.setdefault(session_id, _SessionChannel())
            backlog = list(channel.backlog)
            channel.subscribers.append(live)
        return Subscription(backlog=backlog, live=live)

    def unsubscribe(self, session_id: str, subscription: Subscription) -> None:
        with self._lock:
            channel = self._channels.get(session_id)
            if channel and subscription.live in channel.subscribers:
                channel.subscribers.remove(subscription.live)

    def backlog(self, session_id: str) -> list[dict]:
        with self._lock:
            channel = self._channels.get(session_id)
            return list(channel.backlog) if channel else []
