"""Cross-cutting property tests: structure codecs, raft message handling,
and simulation determinism under generated inputs."""

import random

from hypothesis import given, settings, strategies as st

from snapchain.ledger import (
    Block,
    ReadWriteSet,
    Transaction,
    compute_data_hash,
    decode_block,
    decode_transaction,
    encode_block,
    encode_transaction,
)
from snapchain.raft import AppendEntries, LogEntry, RaftNode
from snapchain.simnet import SimNet, SimNetConfig


keys = st.text(min_size=1, max_size=12)
versions = st.none() | st.tuples(st.integers(0, 2**32), st.integers(0, 2**16))
small_bytes = st.binary(max_size=24)


@st.composite
def rwsets(draw):
    read_keys = draw(st.lists(keys, max_size=4, unique=True))
    write_keys = draw(st.lists(keys, max_size=4, unique=True))
    reads = tuple((k, draw(versions)) for k in read_keys)
    writes = tuple((k, draw(st.none() | small_bytes)) for k in write_keys)
    return ReadWriteSet(reads=reads, writes=writes)


@st.composite
def transactions(draw):
    return Transaction(
        tx_id=draw(st.binary(min_size=32, max_size=32)),
        channel=draw(st.sampled_from(["E1", "E2", "E3", "E4"])),
        chaincode=draw(st.sampled_from(["clients", "photos", "trades", "admin"])),
        function=draw(keys),
        args=tuple(draw(st.lists(small_bytes, max_size=3))),
        rwset=draw(rwsets()),
        endorsements=tuple(draw(st.lists(
            st.tuples(keys, st.binary(min_size=32, max_size=32), small_bytes),
            max_size=3))),
        creator=draw(keys),
        nonce=draw(st.binary(min_size=16, max_size=16)),
        timestamp=draw(st.integers(0, 2**48)),
        creator_sig=draw(small_bytes),
    )


@given(transactions())
def test_transaction_encoding_round_trips(tx):
    assert decode_transaction(encode_transaction(tx)) == tx


@given(st.lists(transactions(), max_size=4), st.integers(0, 2**32),
       st.binary(min_size=32, max_size=32))
def test_block_encoding_round_trips(txs, number, prev_hash):
    block = Block(
        number=number,
        prev_hash=prev_hash,
        data_hash=compute_data_hash(tuple(txs)),
        transactions=tuple(txs),
        validation_flags=tuple("valid" for _ in txs),
    )
    decoded = decode_block(encode_block(block))
    assert decoded == block
    assert decoded.header_hash() == block.header_hash()


@st.composite
def append_messages(draw):
    entries = tuple(
        LogEntry(term=draw(st.integers(1, 5)), payload=draw(small_bytes))
        for _ in range(draw(st.integers(0, 4)))
    )
    prev_index = draw(st.integers(0, 6))
    return AppendEntries(
        term=draw(st.integers(1, 5)),
        leader="L",
        prev_index=prev_index,
        prev_term=draw(st.integers(0, 5)),
        entries=entries,
        leader_commit=draw(st.integers(0, 8)),
    )


def _snapshot(node: RaftNode):
    return (node.term, node.voted_for, tuple(node.log), node.commit_index, node.role)


@given(st.lists(append_messages(), min_size=1, max_size=8))
@settings(max_examples=200)
def test_append_entries_redelivery_is_idempotent(messages):
    # Processing any append twice in a row leaves the follower exactly where
    # one delivery would have; at-least-once transports rely on this.
    node = RaftNode(node_id="F", peers=("L",), rng=random.Random(1))
    for msg in messages:
        node.handle_append_entries("L", msg, now=0)
        once = _snapshot(node)
        node.handle_append_entries("L", msg, now=0)
        assert _snapshot(node) == once


@given(st.lists(append_messages(), min_size=1, max_size=10))
@settings(max_examples=200)
def test_committed_prefix_never_shrinks_or_changes(messages):
    node = RaftNode(node_id="F", peers=("L",), rng=random.Random(1))
    committed: list[LogEntry] = []
    for msg in messages:
        node.handle_append_entries("L", msg, now=0)
        prefix = node.log[: node.commit_index]
        assert prefix[: len(committed)] == committed, "committed prefix changed"
        committed = list(prefix)


@given(st.integers(0, 2**31), st.floats(0.0, 0.5, allow_nan=False),
       st.integers(1, 4))
@settings(max_examples=50, deadline=None)
def test_simnet_schedule_is_seed_deterministic(seed, drop_rate, fanout):
    def run():
        net = SimNet(SimNetConfig(seed=seed, drop_rate=drop_rate))
        trace = []
        for now in range(40):
            for dst in range(fanout):
                net.send("a", f"n{dst}", ("msg", now, dst), now)
            trace.extend(net.due(now))
        trace.extend(net.due(10**9))
        return trace

    assert run() == run()
