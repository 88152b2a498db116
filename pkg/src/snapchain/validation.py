"""Validating phase: per-transaction checks, flagging, and block commit.

Each transaction is checked in block order against the endorsement policy,
the creator's channel rights, and the versions its read set observed. Writes
of valid transactions apply immediately, so later transactions in the same
block that touch the same keys conflict (first writer wins). The whole block
is appended either way; invalid transactions stay visible in the chain but
never reach the world state.
"""

from __future__ import annotations

from .endorsement import (
    EndorsementPolicy,
    proposal_payload,
    verify_endorsement,
)
from .identity import AccessMode, MembershipRegistry, UnknownIdentity
from .ledger import (
    Block,
    ChainBreak,
    ChannelLedger,
    FLAG_ACCESS,
    FLAG_MVCC,
    FLAG_POLICY,
    FLAG_VALID,
    SequenceGap,
    Transaction,
    compute_tx_id,
)


def _policy_ok(tx: Transaction, policy: EndorsementPolicy, msp: MembershipRegistry) -> bool:
    expected_id = compute_tx_id(tx.channel, tx.chaincode, tx.function, tx.args,
                                tx.rwset, tx.creator, tx.nonce, tx.timestamp)
    if tx.tx_id != expected_id:
        return False
    try:
        creator = msp.get_by_id(tx.creator)
    except UnknownIdentity:
        return False
    payload = proposal_payload(tx.channel, tx.chaincode, tx.function, tx.args,
                               tx.creator, tx.nonce, tx.timestamp)
    if not msp.verify_signature(creator, payload, tx.creator_sig):
        return False
    valid_endorsers = set()
    for entry in tx.endorsements:
        if verify_endorsement(entry, tx.channel, tx.chaincode, tx.function,
                              tx.args, tx.rwset, msp):
            valid_endorsers.add(entry[0])
    return len(valid_endorsers) >= policy.required


def validate_transaction(tx: Transaction, state, policy: EndorsementPolicy,
                         written_this_block: set[str], msp: MembershipRegistry) -> str:
    """Flag one transaction against the given state view.

    Checks run in fixed order (policy, access, mvcc) so every peer assigns
    the same flag to the same transaction.
    """
    if not _policy_ok(tx, policy, msp):
        return FLAG_POLICY
    if not msp.check_channel_access(tx.creator, tx.channel, AccessMode.WRITE):
        return FLAG_ACCESS
    for key, observed in tx.rwset.reads:
        if key in written_this_block:
            return FLAG_MVCC
        entry = state.get(key)
        current = entry[1] if entry else None
        if current != observed:
            return FLAG_MVCC
    for key, _ in tx.rwset.writes:
        if key in written_this_block:
            return FLAG_MVCC
    return FLAG_VALID


def apply_block(state: dict, block: Block, msp: MembershipRegistry,
                policy: EndorsementPolicy) -> tuple[str, ...]:
    """Validate a block's transactions in order and apply the valid writes.

    Mutates ``state`` in place and returns the computed flags; used both by
    the live commit path and by replay.
    """
    flags = []
    written: set[str] = set()
    for index, tx in enumerate(block.transactions):
        flag = validate_transaction(tx, state, policy, written, msp)
        flags.append(flag)
        if flag != FLAG_VALID:
            continue
        version = (block.number, index)
        for key, value in tx.rwset.writes:
            if value is None:
                state.pop(key, None)
            else:
                state[key] = (value, version)
            written.add(key)
    return tuple(flags)


def commit_block(ledger: ChannelLedger, block: Block, msp: MembershipRegistry,
                 policy: EndorsementPolicy) -> tuple[str, ...]:
    """Validate, apply, and append one block to a channel ledger.

    Chain linkage is checked before any state mutation so a bad block leaves
    the ledger untouched.
    """
    if block.number != ledger.height:
        raise SequenceGap(f"expected block {ledger.height}, got {block.number}")
    if block.prev_hash != ledger.tip_hash():
        raise ChainBreak(f"block {block.number} does not link to current tip")
    flags = apply_block(ledger.state, block, msp, policy)
    block.validation_flags = flags
    ledger.append_block(block)
    return flags
