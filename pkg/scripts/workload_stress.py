#!/usr/bin/env python3
"""Push a randomized mint/buy workload through the full pipeline.

Reports throughput, block fill, conflict rates, and re-audits the committed
coin flow (conservation after every block, no negative balances).
"""

import argparse
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from snapchain import FLAG_VALID, Network, NetworkConfig, Role
from snapchain.chaincode import ChaincodeError, encode_args
from snapchain.codec import decode_value
from snapchain.ordering import BlockCutConfig

PRICES = {"personal": 10, "editorial": 30, "commercial": 100}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--ops", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--endorsers", type=int, default=2)
    parser.add_argument("--batch", type=int, default=10)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    net = Network(NetworkConfig(
        seed=args.seed, endorser_count=args.endorsers,
        endorsement_required=min(2, args.endorsers),
        block_cut=BlockCutConfig(max_tx_count=args.batch, max_wait=60)))
    net.up()
    admin = net.admin_handle

    sellers = [net.register_client(f"s{i}", Role.PHOTOGRAPHER, "pw") for i in range(3)]
    buyers = [net.register_client(f"c{i}", Role.CUSTOMER, "pw") for i in range(8)]
    photos = []
    for i, owner in enumerate(sellers * 2):
        image = b"\x89PNG\r\n\x1a\n" + bytes([i]) * 6
        photos.append(net.publish_photo(owner, f"p{i}", ["nature"], PRICES, image))

    started = time.perf_counter()
    rejected = 0
    batch = []
    for _ in range(args.ops):
        if rng.random() < 0.35:
            target = rng.choice(buyers)
            batch.append(net.invoke_async(
                admin, "E3", "mint",
                encode_args(target.name, rng.choice([10, 30, 50, 100]))))
        else:
            buyer = rng.choice(buyers)
            try:
                batch.append(net.invoke_async(
                    buyer, "E3", "buy",
                    encode_args(buyer.name, rng.choice(photos),
                                rng.choice(list(PRICES)))))
            except ChaincodeError:
                rejected += 1
        if len(batch) >= args.batch:
            net.run_until(lambda: all(p.resolved for p in batch), 60000)
            batch.clear()
    if batch:
        net.run_until(lambda: all(p.resolved for p in batch), 60000)
    elapsed = time.perf_counter() - started

    ledger = net.reference_peer.ledgers["E3"]
    blocks = ledger.blocks[1:]
    committed = sum(len(b.transactions) for b in blocks)
    conflicts = sum(b.invalid_count() for b in blocks)

    balances: dict[str, int] = {}
    minted = 0
    for block in ledger.blocks:
        for index, tx in enumerate(block.transactions):
            if block.validation_flags[index] != FLAG_VALID:
                continue
            for key, value in tx.rwset.writes:
                if key.startswith("mint:"):
                    minted += decode_value(value)["amount"]
                elif key.startswith("wallet:"):
                    record = decode_value(value)
                    assert record["balance"] >= 0
                    balances[record["owner"]] = record["balance"]
        assert sum(balances.values()) == minted, f"conservation broke at {block.number}"

    print(f"ops submitted     : {args.ops} ({rejected} rejected at endorsement)")
    print(f"txs committed     : {committed} in {len(blocks)} blocks "
          f"({committed / max(len(blocks), 1):.1f} tx/block)")
    print(f"mvcc conflicts    : {conflicts}")
    print(f"wall time         : {elapsed:.2f}s "
          f"({args.ops / elapsed:.0f} ops/s end to end)")
    print(f"sim ticks         : {net.now}")
    print(f"coins minted      : {minted}, in circulation {sum(balances.values())}")
    print("conservation held after every block")
    return 0


if __name__ == "__main__":
    sys.exit(main())
