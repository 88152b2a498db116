import pytest

from snapchain.chaincode import default_descriptors, encode_args
from snapchain.endorsement import (
    EndorsementPolicy,
    assemble_transaction,
    create_proposal,
)
from snapchain.identity import Keypair, MembershipRegistry, Role
from snapchain.ledger import Block, Transaction, compute_data_hash
from snapchain.peer import Peer


class Bed:
    """Pipeline harness without the ordering service.

    Executes proposals on real peers, assembles real transactions, and lets
    tests compose blocks explicitly, which makes read/write races and flag
    checks exact instead of timing-dependent.
    """

    def __init__(self, endorsers: int = 3, required: int = 2):
        self.msp = MembershipRegistry()
        self.policy = EndorsementPolicy(required)
        self.descriptors = default_descriptors(endorsement_policy=required)
        self.peers = []
        for i in range(endorsers):
            keypair = Keypair.from_seed(f"bed-peer-{i}".encode())
            ident = self.msp.register_identity(f"peer{i}", Role.PEER, keypair.public_hex)
            self.peers.append(Peer(ident, keypair, self.msp, self.descriptors, self.policy))
        self.clock = 0

    def client(self, name: str, role: Role):
        keypair = Keypair.from_seed(f"bed-client-{name}".encode())
        ident = self.msp.register_identity(name, role, keypair.public_hex, secret="pw")
        return ident, keypair

    def propose(self, client, channel: str, function: str, *args):
        ident, keypair = client
        self.clock += 1
        return create_proposal(ident, keypair, channel,
                               self.descriptors[channel].name, function,
                               encode_args(*args), timestamp=self.clock, msp=self.msp)

    def endorse_tx(self, client, channel: str, function: str, *args,
                   endorsers: list[int] | None = None) -> tuple[Transaction, bytes]:
        """Full endorsement round; returns the transaction and agreed response."""
        proposal = self.propose(client, channel, function, *args)
        chosen = self.peers if endorsers is None else [self.peers[i] for i in endorsers]
        results = [p.simulate(proposal) for p in chosen]
        tx = assemble_transaction(proposal, results, self.policy)
        return tx, results[0].response

    def cut(self, channel: str, txs: list[Transaction]) -> Block:
        ledger = self.peers[0].ledgers[channel]
        return Block(
            number=ledger.height,
            prev_hash=ledger.tip_hash(),
            data_hash=compute_data_hash(tuple(txs)),
            transactions=tuple(txs),
        )

    def commit(self, channel: str, txs: list[Transaction]) -> tuple[str, ...]:
        """Cut a block from the given transactions and commit it on every peer."""
        from snapchain.network import clone_block

        block = self.cut(channel, txs)
        flags = None
        for peer in self.peers:
            peer_flags = peer.commit_block(channel, clone_block(block))
            assert flags is None or peer_flags == flags, "peers disagree on flags"
            flags = peer_flags
        return flags

    def invoke(self, client, channel: str, function: str, *args) -> tuple[str, bytes]:
        """Endorse, commit in its own block, return (flag, response)."""
        tx, response = self.endorse_tx(client, channel, function, *args)
        flags = self.commit(channel, [tx])
        return flags[0], response

    def state(self, channel: str, key: str):
        return self.peers[0].get_state(channel, key)


@pytest.fixture
def bed():
    return Bed()
