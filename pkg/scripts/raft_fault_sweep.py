#!/usr/bin/env python3
"""Sweep seeded fault scenarios against the ordering service.

Each run builds a full network (orderers + committing peers), injects a
random partition and a leader crash, submits config transactions throughout,
then heals and measures convergence. Prints one row per seed and a summary;
--dump-scenarios writes the per-seed sim configs for replay.
"""

import argparse
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from snapchain import Network, NetworkConfig, SimNetConfig
from snapchain.chaincode import encode_args
from snapchain.ordering import BlockCutConfig
from snapchain.simnet import save_sim_scenario


def run_seed(seed: int, orderers: int, drop_rate: float, dump_dir: Path | None):
    rng = random.Random(seed)
    cfg = NetworkConfig(
        seed=seed, orderer_count=orderers, endorser_count=2,
        block_cut=BlockCutConfig(max_tx_count=4, max_wait=40),
        simnet=SimNetConfig(seed=seed, drop_rate=drop_rate))
    net = Network(cfg)
    net.up()
    admin = net.admin_handle
    first_leader = net.current_leader().node_id

    part_start = rng.randint(100, 600)
    group = set(rng.sample(sorted(net.orderers), max(1, orderers // 2 - 1)))
    net.partition(group, duration=rng.randint(300, 900), start=part_start)
    net.crash(first_leader, duration=rng.randint(200, 600),
              start=rng.randint(200, 1200))

    pendings = []
    terms_with_leader = set()
    while net.now < 2200:
        if rng.random() < 0.08:
            pendings.append(net.invoke_async(
                admin, "E4", "put_config", encode_args(f"k{rng.randint(0, 3)}", net.now)))
        net.run(25)
        for node in net.orderers.values():
            if node.raft.role == "leader":
                terms_with_leader.add(node.raft.term)

    net.heal()
    heal_tick = net.now
    ok = net.run_until(lambda: all(p.resolved for p in pendings), 60000)
    net.run_until(
        lambda: len({tuple(len(o.blocks[ch]) for ch in cfg.channels)
                     for o in net.orderers.values()}) == 1, 40000)
    converge_ticks = net.now - heal_tick

    heights = {ch: net.reference_peer.height(ch) for ch in cfg.channels}
    if dump_dir is not None:
        save_sim_scenario(net.net.cfg, orderers, dump_dir / f"seed{seed}.json")
    return {
        "seed": seed,
        "submitted": len(pendings),
        "committed": sum(1 for p in pendings if p.resolved),
        "valid": sum(1 for p in pendings if p.valid),
        "elections": len(terms_with_leader),
        "converge_ticks": converge_ticks,
        "e4_height": heights["E4"],
        "ok": ok,
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=30)
    parser.add_argument("--orderers", type=int, default=5)
    parser.add_argument("--drop-rate", type=float, default=0.05)
    parser.add_argument("--dump-scenarios", metavar="DIR",
                        help="write per-seed sim scenario files here")
    args = parser.parse_args()

    dump_dir = None
    if args.dump_scenarios:
        dump_dir = Path(args.dump_scenarios)
        dump_dir.mkdir(parents=True, exist_ok=True)

    print(f"{'seed':>5} {'subs':>5} {'valid':>6} {'terms':>6} "
          f"{'converge':>9} {'E4 h':>5} ok")
    started = time.perf_counter()
    rows = []
    for seed in range(args.seeds):
        row = run_seed(seed, args.orderers, args.drop_rate, dump_dir)
        rows.append(row)
        print(f"{row['seed']:>5} {row['submitted']:>5} {row['valid']:>6} "
              f"{row['elections']:>6} {row['converge_ticks']:>9} "
              f"{row['e4_height']:>5} {'yes' if row['ok'] else 'NO'}")
    elapsed = time.perf_counter() - started
    failures = [r for r in rows if not r["ok"]]
    print(f"\n{len(rows)} runs in {elapsed:.1f}s; "
          f"worst convergence {max(r['converge_ticks'] for r in rows)} ticks; "
          f"{len(failures)} failures")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
