"""Per-channel hash-chained block store and versioned world state.

Blocks are append-only and keep their invalid transactions; the world state
only ever reflects writes of transactions flagged valid. Replaying a chain
from genesis must reproduce both the stored flags and the live state, which
makes the chain the arbiter whenever the two disagree.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from . import codec
from .codec import Reader, ZERO_HASH, lp, lp_int, lp_str, sha256, u32

FLAG_VALID = "valid"
FLAG_MVCC = "mvcc-conflict"
FLAG_POLICY = "policy-failure"
FLAG_ACCESS = "access-denied"

_FLAG_BYTES = {FLAG_VALID: b"\x00", FLAG_MVCC: b"\x01", FLAG_POLICY: b"\x02", FLAG_ACCESS: b"\x03"}
_FLAG_NAMES = {v: k for k, v in _FLAG_BYTES.items()}

Version = tuple[int, int]  # (block number, tx index), ordered lexicographically


class LedgerError(Exception):
    pass


class SequenceGap(LedgerError):
    pass


class ChainBreak(LedgerError):
    pass


class OutOfRange(LedgerError):
    pass


@dataclass(frozen=True)
class ReadWriteSet:
    reads: tuple[tuple[str, Version | None], ...] = ()
    writes: tuple[tuple[str, bytes | None], ...] = ()  # value None is a delete marker

    def __post_init__(self):
        read_keys = [k for k, _ in self.reads]
        write_keys = [k for k, _ in self.writes]
        if len(set(read_keys)) != len(read_keys):
            raise ValueError("duplicate key in read set")
        if len(set(write_keys)) != len(write_keys):
            raise ValueError("duplicate key in write set")


@dataclass(frozen=True)
class Transaction:
    tx_id: bytes
    channel: str
    chaincode: str
    function: str
    args: tuple[bytes, ...]
    rwset: ReadWriteSet
    endorsements: tuple[tuple[str, bytes, bytes], ...]  # (endorser id, result digest, signature)
    creator: str  # identity id
    nonce: bytes
    timestamp: int
    creator_sig: bytes


@dataclass
class Block:
    number: int
    prev_hash: bytes
    data_hash: bytes
    transactions: tuple[Transaction, ...]
    validation_flags: tuple[str, ...] = ()  # filled at commit

    def header_hash(self) -> bytes:
        return compute_block_hash((self.number, self.prev_hash, self.data_hash))

    def invalid_count(self) -> int:
        return sum(1 for f in self.validation_flags if f != FLAG_VALID)


# Canonical encodings. Field order matches the declaration order above.

def encode_version(version: Version | None) -> bytes:
    if version is None:
        return b"\x00"
    return b"\x01" + codec.u64(version[0]) + codec.u64(version[1])


def _read_version(r: Reader) -> Version | None:
    marker = r.take(1)
    if marker == b"\x00":
        return None
    return (r.u64(), r.u64())


def encode_rwset(rwset: ReadWriteSet) -> bytes:
    parts = [u32(len(rwset.reads))]
    for key, version in rwset.reads:
        parts.append(lp_str(key))
        parts.append(lp(encode_version(version)))
    parts.append(u32(len(rwset.writes)))
    for key, value in rwset.writes:
        parts.append(lp_str(key))
        if value is None:
            parts.append(b"\x00")
        else:
            parts.append(b"\x01" + lp(value))
    return b"".join(parts)


def _read_rwset(r: Reader) -> ReadWriteSet:
    reads = []
    for _ in range(r.u32()):
        key = r.lp_str()
        reads.append((key, _read_version(Reader(r.lp()))))
    writes = []
    for _ in range(r.u32()):
        key = r.lp_str()
        marker = r.take(1)
        writes.append((key, None if marker == b"\x00" else r.lp()))
    return ReadWriteSet(tuple(reads), tuple(writes))


def tx_content_bytes(channel: str, chaincode: str, function: str, args: tuple[bytes, ...],
                     rwset: ReadWriteSet, creator: str, nonce: bytes, timestamp: int) -> bytes:
    parts = [
        lp_str(channel),
        lp_str(chaincode),
        lp_str(function),
        u32(len(args)),
    ]
    parts.extend(lp(a) for a in args)
    parts.append(lp(encode_rwset(rwset)))
    parts.append(lp_str(creator))
    parts.append(lp(nonce))
    parts.append(lp_int(timestamp))
    return b"".join(parts)


def compute_tx_id(channel: str, chaincode: str, function: str, args: tuple[bytes, ...],
                  rwset: ReadWriteSet, creator: str, nonce: bytes, timestamp: int) -> bytes:
    return sha256(tx_content_bytes(channel, chaincode, function, args, rwset,
                                   creator, nonce, timestamp))


def encode_transaction(tx: Transaction) -> bytes:
    parts = [
        lp(tx.tx_id),
        lp_str(tx.channel),
        lp_str(tx.chaincode),
        lp_str(tx.function),
        u32(len(tx.args)),
    ]
    parts.extend(lp(a) for a in tx.args)
    parts.append(lp(encode_rwset(tx.rwset)))
    parts.append(u32(len(tx.endorsements)))
    for endorser, digest, sig in tx.endorsements:
        parts.append(lp_str(endorser))
        parts.append(lp(digest))
        parts.append(lp(sig))
    parts.append(lp_str(tx.creator))
    parts.append(lp(tx.nonce))
    parts.append(lp_int(tx.timestamp))
    parts.append(lp(tx.creator_sig))
    return b"".join(parts)


def decode_transaction(data: bytes) -> Transaction:
    r = Reader(data)
    tx_id = r.lp()
    channel = r.lp_str()
    chaincode = r.lp_str()
    function = r.lp_str()
    args = tuple(r.lp() for _ in range(r.u32()))
    rwset = _read_rwset(Reader(r.lp()))
    endorsements = tuple((r.lp_str(), r.lp(), r.lp()) for _ in range(r.u32()))
    creator = r.lp_str()
    nonce = r.lp()
    timestamp = r.lp_int()
    creator_sig = r.lp()
    if not r.done():
        raise codec.DecodeError("trailing bytes after transaction")
    return Transaction(tx_id, channel, chaincode, function, args, rwset,
                       endorsements, creator, nonce, timestamp, creator_sig)


def compute_data_hash(transactions: tuple[Transaction, ...]) -> bytes:
    parts = [u32(len(transactions))]
    parts.extend(lp(encode_transaction(tx)) for tx in transactions)
    return sha256(b"".join(parts))


def compute_block_hash(header: tuple[int, bytes, bytes]) -> bytes:
    number, prev_hash, data_hash = header
    return sha256(lp_int(number) + lp(prev_hash) + lp(data_hash))


def encode_block(block: Block) -> bytes:
    parts = [
        lp_int(block.number),
        lp(block.prev_hash),
        lp(block.data_hash),
        u32(len(block.transactions)),
    ]
    parts.extend(lp(encode_transaction(tx)) for tx in block.transactions)
    parts.append(u32(len(block.validation_flags)))
    parts.extend(_FLAG_BYTES[f] for f in block.validation_flags)
    return b"".join(parts)


def decode_block(data: bytes) -> Block:
    r = Reader(data)
    number = r.lp_int()
    prev_hash = r.lp()
    data_hash = r.lp()
    transactions = tuple(decode_transaction(r.lp()) for _ in range(r.u32()))
    flags = tuple(_FLAG_NAMES[r.take(1)] for _ in range(r.u32()))
    if not r.done():
        raise codec.DecodeError("trailing bytes after block")
    return Block(number, prev_hash, data_hash, transactions, flags)


def make_genesis_block() -> Block:
    return Block(
        number=0,
        prev_hash=ZERO_HASH,
        data_hash=compute_data_hash(()),
        transactions=(),
        validation_flags=(),
    )


class ChannelLedger:
    """One channel: its block chain plus the derived key/value state.

    State mutation goes through apply_write, which the validation commit path
    drives; the ledger itself only enforces chain shape (numbering, linkage)
    and persistence.
    """

    def __init__(self, channel_id: str, store_path: str | Path | None = None):
        self.channel_id = channel_id
        self.blocks: list[Block] = []
        self.state: dict[str, tuple[bytes, Version]] = {}
        self.store_path = Path(store_path) if store_path else None
        if self.store_path and self.store_path.exists():
            self._load_from_file()

    @property
    def height(self) -> int:
        return len(self.blocks)

    def tip_hash(self) -> bytes:
        if not self.blocks:
            return ZERO_HASH
        return self.blocks[-1].header_hash()

    def append_block(self, block: Block) -> None:
        if block.number != self.height:
            raise SequenceGap(f"expected block {self.height}, got {block.number}")
        expected_prev = ZERO_HASH if block.number == 0 else self.blocks[-1].header_hash()
        if block.prev_hash != expected_prev:
            raise ChainBreak(f"block {block.number} does not link to current tip")
        if block.transactions and len(block.validation_flags) != len(block.transactions):
            raise LedgerError("committed block must carry one flag per transaction")
        self.blocks.append(block)
        if self.store_path:
            with open(self.store_path, "ab") as fh:
                fh.write(lp(encode_block(block)))

    def get_block(self, number: int) -> Block:
        if number < 0 or number >= self.height:
            raise OutOfRange(f"block {number} out of range (height {self.height})")
        return self.blocks[number]

    def get_state(self, key: str) -> tuple[bytes, Version] | None:
        return self.state.get(key)

    def apply_write(self, key: str, value: bytes | None, version: Version) -> None:
        if value is None:
            self.state.pop(key, None)
        else:
            self.state[key] = (value, version)

    def scan(self, prefix: str):
        """Deterministic (key-sorted) iteration over a key prefix."""
        for key in sorted(self.state):
            if key.startswith(prefix):
                yield key, self.state[key]

    def verify_integrity(self) -> None:
        """Full hash-linkage check from genesis; raises ChainBreak on damage."""
        prev = ZERO_HASH
        for n, block in enumerate(self.blocks):
            if block.number != n:
                raise SequenceGap(f"block {n} carries number {block.number}")
            if block.prev_hash != prev:
                raise ChainBreak(f"block {n} prev_hash mismatch")
            if block.data_hash != compute_data_hash(block.transactions):
                raise ChainBreak(f"block {n} data_hash mismatch")
            prev = block.header_hash()

    def replay(self, msp, policy) -> dict[str, tuple[bytes, Version]]:
        """Rebuild world state from genesis, re-validating every block.

        Returns the recomputed state; raises if the chain is damaged or the
        recomputed flags disagree with the stored ones.
        """
        from . import validation

        self.verify_integrity()
        state: dict[str, tuple[bytes, Version]] = {}
        for block in self.blocks:
            flags = validation.apply_block(state, block, msp, policy)
            if block.validation_flags and flags != block.validation_flags:
                raise LedgerError(
                    f"replay flags diverge from stored flags in block {block.number}"
                )
        return state

    def block_summaries(self, start: int = 0, end: int | None = None) -> list[str]:
        """One line per block: number, hash prefix, tx count, invalid count."""
        end = self.height if end is None else min(end, self.height)
        lines = []
        for block in self.blocks[start:end]:
            lines.append(
                f"{block.number} {block.header_hash().hex()[:12]} "
                f"{len(block.transactions)} {block.invalid_count()}"
            )
        return lines

    def _load_from_file(self) -> None:
        data = self.store_path.read_bytes()
        r = Reader(data)
        while not r.done():
            self.blocks.append(decode_block(r.lp()))

    def rebuild_state(self, msp, policy) -> None:
        """Recompute live state from the chain (used after loading from disk)."""
        self.state = self.replay(msp, policy)
