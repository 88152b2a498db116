"""Execution phase: proposals, endorser simulation, transaction assembly.

A client signs a proposal, fans it out to endorsers, and collects signed
endorsements over the simulated result. Endorsers simulate against their own
latest committed snapshot, so results can diverge when peers lag; assembly
requires k endorsements whose result digests agree.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass

from .codec import lp, lp_int, lp_str, sha256, u32
from .identity import AccessMode, Identity, Keypair, MembershipRegistry, verify_raw
from .ledger import (
    ReadWriteSet,
    Transaction,
    compute_tx_id,
    encode_rwset,
)


class EndorsementError(Exception):
    pass


class AccessDenied(EndorsementError):
    pass


class BadProposalSignature(EndorsementError):
    pass


class InsufficientEndorsements(EndorsementError):
    pass


class DivergentResults(EndorsementError):
    pass


@dataclass(frozen=True)
class Proposal:
    channel: str
    chaincode: str
    function: str
    args: tuple[bytes, ...]
    creator: str  # identity id
    nonce: bytes
    timestamp: int
    signature: bytes


@dataclass(frozen=True)
class Endorsement:
    endorser: str  # identity id
    result_digest: bytes
    signature: bytes


@dataclass(frozen=True)
class EndorsementPolicy:
    required: int  # k matching endorsements out of the channel's N endorsers

    def __post_init__(self):
        if self.required < 1:
            raise ValueError("endorsement policy requires at least one endorsement")


@dataclass(frozen=True)
class SimulationResult:
    response: bytes
    rwset: ReadWriteSet
    endorsement: Endorsement


def _args_bytes(args: tuple[bytes, ...]) -> bytes:
    return u32(len(args)) + b"".join(lp(a) for a in args)


def proposal_payload(channel: str, chaincode: str, function: str, args: tuple[bytes, ...],
                     creator: str, nonce: bytes, timestamp: int) -> bytes:
    return (b"proposal:" + lp_str(channel) + lp_str(chaincode) + lp_str(function)
            + _args_bytes(args) + lp_str(creator) + lp(nonce) + lp_int(timestamp))


def endorsement_payload(channel: str, chaincode: str, function: str,
                        args: tuple[bytes, ...], rwset: ReadWriteSet) -> bytes:
    """Bytes an endorser signs; recomputable from the transaction alone."""
    return (b"endorse:" + lp_str(channel) + lp_str(chaincode) + lp_str(function)
            + _args_bytes(args) + lp(encode_rwset(rwset)))


def result_digest(response: bytes, rwset: ReadWriteSet) -> bytes:
    """Digest used to match endorser results at assembly time."""
    return sha256(b"result:" + lp(response) + lp(encode_rwset(rwset)))


def create_proposal(client: Identity, signer: Keypair, channel: str, chaincode: str,
                    function: str, args: tuple[bytes, ...], timestamp: int,
                    msp: MembershipRegistry, nonce: bytes | None = None) -> Proposal:
    if not msp.check_channel_access(client, channel, AccessMode.WRITE):
        raise AccessDenied(f"{client.name} may not write to channel {channel}")
    if nonce is None:
        nonce = secrets.token_bytes(16)
    payload = proposal_payload(channel, chaincode, function, args, client.id, nonce, timestamp)
    return Proposal(
        channel=channel,
        chaincode=chaincode,
        function=function,
        args=tuple(args),
        creator=client.id,
        nonce=nonce,
        timestamp=timestamp,
        signature=signer.sign(payload),
    )


def verify_proposal(proposal: Proposal, msp: MembershipRegistry) -> Identity:
    creator = msp.get_by_id(proposal.creator)
    payload = proposal_payload(proposal.channel, proposal.chaincode, proposal.function,
                               proposal.args, proposal.creator, proposal.nonce,
                               proposal.timestamp)
    if not msp.verify_signature(creator, payload, proposal.signature):
        raise BadProposalSignature(f"proposal signature invalid for {creator.name}")
    return creator


def sign_endorsement(endorser: Identity, signer: Keypair, proposal: Proposal,
                     response: bytes, rwset: ReadWriteSet) -> Endorsement:
    payload = endorsement_payload(proposal.channel, proposal.chaincode,
                                  proposal.function, proposal.args, rwset)
    return Endorsement(
        endorser=endorser.id,
        result_digest=result_digest(response, rwset),
        signature=signer.sign(payload),
    )


def verify_endorsement(endorsement_tuple: tuple[str, bytes, bytes], channel: str,
                       chaincode: str, function: str, args: tuple[bytes, ...],
                       rwset: ReadWriteSet, msp: MembershipRegistry) -> bool:
    endorser_id, _digest, signature = endorsement_tuple
    try:
        endorser = msp.get_by_id(endorser_id)
    except Exception:
        return False
    if not endorser.enrolled:
        return False
    payload = endorsement_payload(channel, chaincode, function, args, rwset)
    return verify_raw(endorser.public_key, payload, signature)


def assemble_transaction(proposal: Proposal, results: list[SimulationResult],
                         policy: EndorsementPolicy) -> Transaction:
    """Build a transaction from endorsements whose result digests agree.

    Raises InsufficientEndorsements when fewer than k endorsements were
    collected at all, DivergentResults when k were collected but no digest is
    shared by k of them.
    """
    if len(results) < policy.required:
        raise InsufficientEndorsements(
            f"got {len(results)} endorsements, policy requires {policy.required}"
        )
    groups: dict[bytes, list[SimulationResult]] = {}
    for result in results:
        groups.setdefault(result.endorsement.result_digest, []).append(result)
    digest, group = max(groups.items(), key=lambda item: len(item[1]))
    if len(group) < policy.required:
        raise DivergentResults(
            f"no result digest shared by {policy.required} endorsers "
            f"(best agreement: {len(group)})"
        )
    agreed = group[0]
    tx_id = compute_tx_id(proposal.channel, proposal.chaincode, proposal.function,
                          proposal.args, agreed.rwset, proposal.creator,
                          proposal.nonce, proposal.timestamp)
    return Transaction(
        tx_id=tx_id,
        channel=proposal.channel,
        chaincode=proposal.chaincode,
        function=proposal.function,
        args=proposal.args,
        rwset=agreed.rwset,
        endorsements=tuple(
            (r.endorsement.endorser, r.endorsement.result_digest, r.endorsement.signature)
            for r in group
        ),
        creator=proposal.creator,
        nonce=proposal.nonce,
        timestamp=proposal.timestamp,
        creator_sig=proposal.signature,
    )
