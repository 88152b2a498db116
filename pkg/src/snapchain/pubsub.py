"""Topic subscriptions with pull-based delivery backed by the chain.

Events are not a separate queue: they are derived from committed publish
transactions, so a subscriber polling with a cursor can never lose one and
never sees one twice. Transactions flagged invalid produce no events at all.

Cursor updates are returned together with the events; a caller that persists
the new cursor only after handling the events gets at-least-once on crash and
exactly-once otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .codec import decode_value
from .identity import AccessMode, Identity, MembershipRegistry
from .ledger import Block, FLAG_VALID

PHOTOS_CHANNEL = "E2"


class SubscriptionError(Exception):
    pass


class UnknownTopic(SubscriptionError):
    pass


class SubscribeAccessDenied(SubscriptionError):
    pass


@dataclass(frozen=True)
class PublishEvent:
    photo_id: str
    topic: str
    block_num: int
    tx_index: int
    publisher: str


@dataclass(frozen=True)
class Subscription:
    subscriber: str  # identity name
    topic: str
    cursor: int  # last-seen block number on the photos channel


def extract_publish_events(block: Block) -> list[PublishEvent]:
    """Events for the valid publish transactions of a committed photos block."""
    events: list[PublishEvent] = []
    for index, tx in enumerate(block.transactions):
        if block.validation_flags[index] != FLAG_VALID or tx.function != "publish":
            continue
        for key, value in tx.rwset.writes:
            if not key.startswith("photo:") or value is None:
                continue
            record = decode_value(value)
            for topic in record["categories"]:
                events.append(PublishEvent(
                    photo_id=record["photo_id"],
                    topic=topic,
                    block_num=block.number,
                    tx_index=index,
                    publisher=record["owner"],
                ))
    return events


def match(event: PublishEvent, sub: Subscription) -> bool:
    return event.topic == sub.topic


class SubscriptionStore:
    """Gateway-side registry of (subscriber, topic) -> cursor."""

    def __init__(self, msp: MembershipRegistry, whitelist: list[str] | None = None):
        self.msp = msp
        self.whitelist = whitelist
        self._subs: dict[tuple[str, str], Subscription] = {}

    def set_whitelist(self, topics: list[str] | None) -> None:
        self.whitelist = topics

    def subscribe(self, identity: Identity, topic: str, current_height: int) -> Subscription:
        """Idempotent: re-subscribing returns the existing subscription."""
        if not topic:
            raise UnknownTopic("topic must be non-empty")
        if self.whitelist is not None and topic not in self.whitelist:
            raise UnknownTopic(f"topic not in configured whitelist: {topic}")
        if not self.msp.check_channel_access(identity, PHOTOS_CHANNEL, AccessMode.READ):
            raise SubscribeAccessDenied(f"{identity.name} may not read {PHOTOS_CHANNEL}")
        key = (identity.name, topic)
        existing = self._subs.get(key)
        if existing is not None:
            return existing
        sub = Subscription(subscriber=identity.name, topic=topic,
                           cursor=current_height - 1)
        self._subs[key] = sub
        return sub

    def get(self, name: str, topic: str) -> Subscription | None:
        return self._subs.get((name, topic))

    def poll(self, sub: Subscription, peer) -> tuple[list[PublishEvent], Subscription]:
        """Matching events in blocks (cursor, height], plus the advanced cursor."""
        height = peer.height(PHOTOS_CHANNEL)
        latest = height - 1
        if latest <= sub.cursor:
            return [], sub
        events = [e for e in peer.events_between(PHOTOS_CHANNEL, sub.cursor, latest)
                  if match(e, sub)]
        advanced = replace(sub, cursor=latest)
        key = (sub.subscriber, sub.topic)
        if key in self._subs and advanced.cursor > self._subs[key].cursor:
            self._subs[key] = advanced
        return events, advanced
