"""Ordering service: a Raft group totally ordering transactions per channel.

One Raft log carries every channel; each entry is a channel-tagged
transaction, a block-cut marker, or a leader barrier. Because the cut
markers live in the log, block boundaries are a pure function of the
committed prefix and every orderer materializes bit-identical blocks, no
matter when it learns about them.

The current leader also pushes cut blocks to the validating peers with
cumulative acks and periodic retransmission, so delivery survives drops,
partitions, and leader changes (receives are idempotent by block number).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import raft
from .codec import Reader, lp, lp_str
from .ledger import (
    Block,
    Transaction,
    compute_data_hash,
    decode_transaction,
    encode_block,
    encode_transaction,
    make_genesis_block,
)

RETRANSMIT_INTERVAL = 100
DELIVERY_WINDOW = 8

PAYLOAD_TX = b"T"
PAYLOAD_CUT = b"C"
PAYLOAD_NOOP = b"N"


@dataclass
class BlockCutConfig:
    max_tx_count: int = 10
    max_wait: int = 500  # ticks a pending transaction may age before a cut

    def __post_init__(self):
        if self.max_tx_count < 1 or self.max_wait < 1:
            raise ValueError("block cutting requires max_tx_count >= 1 and max_wait >= 1")


@dataclass(frozen=True)
class BlockDeliver:
    channel: str
    number: int
    block_bytes: bytes


@dataclass(frozen=True)
class BlockAck:
    channel: str
    height: int


def encode_tx_payload(channel: str, tx: Transaction) -> bytes:
    return PAYLOAD_TX + lp_str(channel) + lp(encode_transaction(tx))


def decode_payload(payload: bytes):
    """Returns ('tx', channel, Transaction) | ('cut', channel, None) | ('noop', None, None)."""
    kind = payload[:1]
    if kind == PAYLOAD_NOOP:
        return ("noop", None, None)
    r = Reader(payload, 1)
    channel = r.lp_str()
    if kind == PAYLOAD_CUT:
        return ("cut", channel, None)
    return ("tx", channel, decode_transaction(r.lp()))


def cut_block(pending: list[tuple[Transaction, int]], cfg: BlockCutConfig,
              now: int) -> list[Transaction] | None:
    """Count-or-timeout cutting decision over pending (tx, arrival tick) pairs.

    Returns the transactions forming the next block body, or None when the
    block is not ready. Never proposes an empty block.
    """
    if not pending:
        return None
    if len(pending) >= cfg.max_tx_count:
        return [tx for tx, _ in pending[: cfg.max_tx_count]]
    oldest = pending[0][1]
    if now - oldest >= cfg.max_wait:
        return [tx for tx, _ in pending]
    return None


class OrdererNode:
    """One ordering-service member: Raft node plus cutting and delivery."""

    def __init__(self, node_id: str, orderer_ids: tuple[str, ...], peer_ids: tuple[str, ...],
                 channels: tuple[str, ...], cut_cfg: BlockCutConfig, rng: random.Random):
        self.node_id = node_id
        self.channels = channels
        self.cut_cfg = cut_cfg
        self.peer_ids = peer_ids
        others = tuple(o for o in orderer_ids if o != node_id)
        self.raft = raft.RaftNode(node_id=node_id, peers=others, rng=rng)
        genesis_hash = make_genesis_block().header_hash()
        # Blocks materialized from the committed log, encoded for delivery.
        self.blocks: dict[str, list[bytes]] = {ch: [] for ch in channels}
        self._tips: dict[str, bytes] = {ch: genesis_hash for ch in channels}
        self._consumed = 0  # highest log index already materialized
        self._mat_pending: dict[str, list[Transaction]] = {ch: [] for ch in channels}
        # Leader-side cutting state over the not-yet-cut suffix of its own log.
        self._cut_pending: dict[str, list[tuple[Transaction, int]]] = {ch: [] for ch in channels}
        self._was_leader = False
        self._acked: dict[str, dict[str, int]] = {p: {ch: 0 for ch in channels}
                                                  for p in peer_ids}
        self._last_push = 0

    @property
    def is_leader(self) -> bool:
        return self.raft.role == raft.LEADER

    def chain_height(self, channel: str) -> int:
        return len(self.blocks[channel]) + 1  # genesis counts

    def submit_tx(self, channel: str, tx: Transaction, now: int) -> tuple[str, str | None]:
        """Client submission: 'accepted' | 'redirected' (with leader id) | 'unavailable'."""
        if not self.is_leader:
            if self.raft.leader_id and self.raft.leader_id != self.node_id:
                return ("redirected", self.raft.leader_id)
            return ("unavailable", None)
        self.raft.submit(encode_tx_payload(channel, tx))
        self._cut_pending[channel].append((tx, now))
        return ("accepted", None)

    def deliver_blocks(self, channel: str, start: int) -> list[bytes]:
        """Encoded cut blocks numbered >= start (genesis is not the orderer's to serve)."""
        offset = max(start, 1) - 1
        return self.blocks[channel][offset:]

    def bootstrap(self, channel: str, encoded_blocks: list[bytes], tip_hash: bytes) -> None:
        """Adopt an existing chain (workspace reload) so new cuts extend it."""
        self.blocks[channel] = list(encoded_blocks)
        self._tips[channel] = tip_hash

    def handle(self, src: str, msg, now: int) -> list[tuple[str, object]]:
        if isinstance(msg, BlockAck):
            acked = self._acked.setdefault(src, {ch: 0 for ch in self.channels})
            if msg.height > acked.get(msg.channel, 0):
                acked[msg.channel] = msg.height
                return self._push_channel(src, msg.channel)
            return []
        out = self.raft.handle(src, msg, now)
        return out

    def tick(self, now: int) -> list[tuple[str, object]]:
        out: list[tuple[str, object]] = []
        became_leader = self.is_leader and not self._was_leader
        lost_leadership = self._was_leader and not self.is_leader
        if became_leader:
            self._rebuild_cut_pending(now)
        if lost_leadership:
            self._cut_pending = {ch: [] for ch in self.channels}
        self._was_leader = self.is_leader

        if self.is_leader:
            appended = False
            for channel in self.channels:
                body = cut_block(self._cut_pending[channel], self.cut_cfg, now)
                if body is None:
                    continue
                self.raft.submit(PAYLOAD_CUT + lp_str(channel))
                del self._cut_pending[channel][: len(body)]
                appended = True
            if appended:
                out.extend(self.raft.note_new_entries(now))

        out.extend(self.raft.tick(now))
        freshly_cut = self._materialize()

        if self.is_leader:
            if freshly_cut or now - self._last_push >= RETRANSMIT_INTERVAL:
                self._last_push = now
                for peer in self.peer_ids:
                    for channel in self.channels:
                        out.extend(self._push_channel(peer, channel))
        return out

    def on_recover(self, now: int) -> None:
        self.raft.crash_recover(now)
        self._was_leader = False
        self._acked = {p: {ch: 0 for ch in self.channels} for p in self.peer_ids}

    def _rebuild_cut_pending(self, now: int) -> None:
        """Recover the uncut suffix of the log when taking over leadership."""
        pending: dict[str, list[tuple[Transaction, int]]] = {ch: [] for ch in self.channels}
        for entry in self.raft.log:
            kind, channel, tx = decode_payload(entry.payload)
            if kind == "tx":
                pending[channel].append((tx, now))
            elif kind == "cut":
                count = min(len(pending[channel]), self.cut_cfg.max_tx_count)
                del pending[channel][:count]
        self._cut_pending = pending

    def _materialize(self) -> bool:
        """Turn newly committed entries into blocks; identical on every orderer."""
        cut_any = False
        while self._consumed < self.raft.commit_index:
            self._consumed += 1
            entry = self.raft.log[self._consumed - 1]
            kind, channel, tx = decode_payload(entry.payload)
            if kind == "tx":
                self._mat_pending[channel].append(tx)
            elif kind == "cut":
                body = self._mat_pending[channel][: self.cut_cfg.max_tx_count]
                if not body:
                    continue  # stale marker; never emit an empty block
                del self._mat_pending[channel][: len(body)]
                number = len(self.blocks[channel]) + 1
                block = Block(
                    number=number,
                    prev_hash=self._tips[channel],
                    data_hash=compute_data_hash(tuple(body)),
                    transactions=tuple(body),
                )
                self._tips[channel] = block.header_hash()
                self.blocks[channel].append(encode_block(block))
                cut_any = True
        return cut_any

    def _push_channel(self, peer: str, channel: str) -> list[tuple[str, object]]:
        # Acks carry the highest cut block number the peer holds (genesis is
        # block 0 and never delivered), so acked == len(chain) means caught up.
        acked = self._acked[peer][channel]
        chain = self.blocks[channel]
        out = []
        for offset in range(acked, min(acked + DELIVERY_WINDOW, len(chain))):
            out.append((peer, BlockDeliver(channel, offset + 1, chain[offset])))
        return out
