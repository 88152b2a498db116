"""Endorsing and committing peer.

A peer keeps its own copy of every channel (chain plus world state),
simulates proposals against its latest committed snapshot, and validates and
commits the blocks the ordering service delivers. Receives are idempotent by
block number and out-of-order deliveries are buffered, so at-least-once
delivery is safe.
"""

from __future__ import annotations

from pathlib import Path

from . import pubsub, validation
from .chaincode import ChaincodeDescriptor, execute
from .endorsement import (
    EndorsementPolicy,
    Proposal,
    SimulationResult,
    sign_endorsement,
    verify_proposal,
)
from .identity import Identity, Keypair, MembershipRegistry
from .ledger import Block, ChannelLedger, decode_block, make_genesis_block
from .ordering import BlockAck, BlockDeliver

REORDER_BUFFER_LIMIT = 16


class Peer:
    def __init__(self, identity: Identity, signer: Keypair, msp: MembershipRegistry,
                 descriptors: dict[str, ChaincodeDescriptor],
                 policy: EndorsementPolicy, store_dir: str | Path | None = None):
        self.identity = identity
        self.signer = signer
        self.msp = msp
        self.descriptors = descriptors
        self.policy = policy
        self.ledgers: dict[str, ChannelLedger] = {}
        # tx_id -> (channel, block number, tx index, flag)
        self.tx_index: dict[bytes, tuple[str, int, int, str]] = {}
        # channel -> per-block lists of publish events (index 0 = genesis, empty)
        self.publish_events: dict[str, list[list[pubsub.PublishEvent]]] = {}
        self._reorder: dict[str, dict[int, bytes]] = {ch: {} for ch in descriptors}
        self.blocks_committed = 0
        for channel in descriptors:
            path = Path(store_dir) / f"{channel}.chain" if store_dir else None
            ledger = ChannelLedger(channel, store_path=path)
            if ledger.height == 0:
                ledger.append_block(make_genesis_block())
            else:
                ledger.rebuild_state(msp, policy)
            self.ledgers[channel] = ledger
            self.publish_events[channel] = [[]]
            for block in ledger.blocks[1:]:
                self._index_block(channel, block)

    def height(self, channel: str) -> int:
        return self.ledgers[channel].height

    def get_state(self, channel: str, key: str):
        return self.ledgers[channel].get_state(key)

    def simulate(self, proposal: Proposal) -> SimulationResult:
        """Execute a proposal read-only on the current committed snapshot."""
        creator = verify_proposal(proposal, self.msp)
        descriptor = self.descriptors[proposal.channel]
        if descriptor.name != proposal.chaincode:
            raise KeyError(f"chaincode {proposal.chaincode} not installed on {proposal.channel}")
        response, rwset = execute(
            descriptor, proposal.function, proposal.args,
            self.ledgers[proposal.channel].state, creator,
            timestamp=proposal.timestamp, nonce=proposal.nonce,
        )
        endorsement = sign_endorsement(self.identity, self.signer, proposal, response, rwset)
        return SimulationResult(response=response, rwset=rwset, endorsement=endorsement)

    def query(self, proposal: Proposal) -> bytes:
        """Evaluate a read-only function without producing an endorsement."""
        creator = verify_proposal(proposal, self.msp)
        descriptor = self.descriptors[proposal.channel]
        response, _ = execute(
            descriptor, proposal.function, proposal.args,
            self.ledgers[proposal.channel].state, creator,
            timestamp=proposal.timestamp, nonce=proposal.nonce,
        )
        return response

    def commit_block(self, channel: str, block: Block) -> tuple[str, ...]:
        flags = validation.commit_block(self.ledgers[channel], block, self.msp, self.policy)
        self._index_block(channel, block)
        self.blocks_committed += 1
        return flags

    def _index_block(self, channel: str, block: Block) -> None:
        for index, tx in enumerate(block.transactions):
            # A resubmitted transaction can land twice (the duplicate gets an
            # mvcc-conflict flag); the first occurrence is the client's fate.
            if tx.tx_id not in self.tx_index:
                flag = block.validation_flags[index]
                self.tx_index[tx.tx_id] = (channel, block.number, index, flag)
        events = pubsub.extract_publish_events(block) if channel == "E2" else []
        self.publish_events[channel].append(events)

    def events_between(self, channel: str, after: int, upto: int) -> list[pubsub.PublishEvent]:
        """Publish events from blocks (after, upto], in chain order."""
        out: list[pubsub.PublishEvent] = []
        per_block = self.publish_events[channel]
        for number in range(after + 1, min(upto, len(per_block) - 1) + 1):
            out.extend(per_block[number])
        return out

    # Simulated-network handler interface

    def handle(self, src: str, msg, now: int) -> list[tuple[str, object]]:
        if not isinstance(msg, BlockDeliver):
            return []
        ledger = self.ledgers[msg.channel]
        buffer = self._reorder[msg.channel]
        if msg.number >= ledger.height and msg.number < ledger.height + REORDER_BUFFER_LIMIT:
            buffer[msg.number] = msg.block_bytes
        while ledger.height in buffer:
            block = decode_block(buffer.pop(ledger.height))
            self.commit_block(msg.channel, block)
        return [(src, BlockAck(channel=msg.channel, height=ledger.height - 1))]

    def tick(self, now: int) -> list[tuple[str, object]]:
        return []
