"""Operator command line.

Verbs: net-up (initialize a workspace), serve (HTTP gateway over a
workspace), run-scenario (scripted run in simulation mode), inspect (block
summaries from stored chains), inject-fault (schedule partitions/crashes/
drops for the next run).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .gateway import Gateway, GatewayConfig
from .ledger import ChannelLedger
from .network import BadConfig, Network, NetworkConfig
from .scenario import load_scenario, run_scenario
from .simnet import CrashWindow, PartitionWindow


def _load_config(args, data_dir: str | None = None) -> NetworkConfig:
    doc = {}
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
    overrides = {}
    if data_dir is not None:
        overrides["data_dir"] = data_dir
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    cfg = NetworkConfig.from_json(doc, **overrides)
    cfg.validate()
    return cfg


def _apply_faults(cfg: NetworkConfig, workspace: Path | None) -> NetworkConfig:
    if workspace is None:
        return cfg
    faults_path = workspace / "faults.jsonl"
    if not faults_path.exists():
        return cfg
    partitions = list(cfg.simnet.partitions)
    crashes = list(cfg.simnet.crashes)
    drop_rate = cfg.simnet.drop_rate
    for line in faults_path.read_text().splitlines():
        if not line.strip():
            continue
        fault = json.loads(line)
        kind = fault["kind"]
        if kind == "partition":
            partitions.append(PartitionWindow(fault["start"], fault["end"],
                                              frozenset(fault["targets"])))
        elif kind == "crash":
            for target in fault["targets"]:
                crashes.append(CrashWindow(fault["start"], fault["end"], target))
        elif kind == "drop":
            drop_rate = fault["rate"]
        else:
            raise SystemExit(f"unknown fault kind in faults.jsonl: {kind}")
    from dataclasses import replace

    cfg.simnet = replace(cfg.simnet, partitions=tuple(partitions),
                         crashes=tuple(crashes), drop_rate=drop_rate)
    return cfg


def cmd_net_up(args) -> int:
    workspace = Path(args.dir)
    workspace.mkdir(parents=True, exist_ok=True)
    try:
        cfg = _load_config(args, data_dir=str(workspace))
    except BadConfig as exc:
        print(f"bad-config: {exc}", file=sys.stderr)
        return 2
    cfg = _apply_faults(cfg, workspace)
    net = Network(cfg)
    net.up()
    doc = cfg.to_json()
    doc["admin_secret"] = cfg.admin_secret
    (workspace / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    leader = net.current_leader()
    print(f"network up in {workspace} (seed {cfg.seed})")
    print(f"orderers: {cfg.orderer_count}  endorsers: {cfg.endorser_count}  "
          f"policy: {cfg.endorsement_required}-of-{cfg.endorser_count}")
    print(f"leader: {leader.node_id if leader else 'none'} at tick {net.now}")
    for channel in cfg.channels:
        ledger = net.reference_peer.ledgers[channel]
        print(f"  {channel}: height {ledger.height} tip {ledger.tip_hash().hex()[:12]}")
    return 0


def cmd_serve(args) -> int:
    workspace = Path(args.dir) if args.dir else None
    if workspace and (workspace / "config.json").exists() and not args.config:
        args.config = str(workspace / "config.json")
    try:
        cfg = _load_config(args, data_dir=str(workspace) if workspace else None)
    except BadConfig as exc:
        print(f"bad-config: {exc}", file=sys.stderr)
        return 2
    cfg = _apply_faults(cfg, workspace)
    net = Network(cfg)
    net.up()
    host, _, port = args.listen.partition(":")
    gw_cfg = GatewayConfig(host=host or "127.0.0.1", port=int(port or 0),
                           ui_dir=args.ui_dir, pump_sleep=args.pump_sleep)
    gateway = Gateway(net, gw_cfg)
    addr = gateway.start()
    print(f"gateway listening on http://{addr[0]}:{addr[1]}")
    print(f"admin login: {cfg.admin_name} / {cfg.admin_secret}")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        gateway.stop()
    return 0


def cmd_run_scenario(args) -> int:
    try:
        cfg = _load_config(args)
    except BadConfig as exc:
        print(f"bad-config: {exc}", file=sys.stderr)
        return 2
    cfg = _apply_faults(cfg, Path(args.dir) if args.dir else None)
    steps = load_scenario(args.scenario)
    net = Network(cfg)
    net.up()
    result = run_scenario(net, steps)
    print(result.summary())
    return 0 if result.ok else 1


def cmd_inspect(args) -> int:
    workspace = Path(args.dir)
    chain_path = workspace / "chains" / f"{args.channel}.chain"
    if not chain_path.exists():
        print(f"unknown channel or empty workspace: {args.channel}", file=sys.stderr)
        return 2
    ledger = ChannelLedger(args.channel, store_path=chain_path)
    ledger.verify_integrity()
    end = args.to if args.to is not None else ledger.height
    for line in ledger.block_summaries(args.from_block, end):
        print(line)
    return 0


def cmd_inject_fault(args) -> int:
    workspace = Path(args.dir)
    workspace.mkdir(parents=True, exist_ok=True)
    if args.kind in ("partition", "crash"):
        if not args.target:
            print("--target required for partition/crash", file=sys.stderr)
            return 2
        fault = {"kind": args.kind, "targets": args.target.split(","),
                 "start": args.from_tick, "end": args.to_tick}
    elif args.kind == "drop":
        fault = {"kind": "drop", "rate": args.rate}
    else:
        print(f"unknown fault kind: {args.kind}", file=sys.stderr)
        return 2
    with open(workspace / "faults.jsonl", "a") as fh:
        fh.write(json.dumps(fault, sort_keys=True) + "\n")
    print(f"scheduled {args.kind} fault; applies to the next run in {workspace}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snapchain",
        description="photo trading platform on a miniature permissioned ledger",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("net-up", help="initialize a network workspace")
    p.add_argument("--dir", required=True, help="workspace directory")
    p.add_argument("--config", help="network config JSON")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_net_up)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    p.add_argument("--dir", help="workspace directory (optional: ephemeral otherwise)")
    p.add_argument("--config", help="network config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--listen", default="127.0.0.1:8080")
    p.add_argument("--ui-dir", help="directory with the built web client")
    p.add_argument("--pump-sleep", type=float, default=0.0,
                   help="wall seconds yielded per simulation step")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("run-scenario", help="execute a scripted scenario")
    p.add_argument("scenario", help="JSONL scenario file")
    p.add_argument("--config", help="network config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--dir", help="workspace whose fault schedule should apply")
    p.set_defaults(func=cmd_run_scenario)

    p = sub.add_parser("inspect", help="print block summaries for a channel")
    p.add_argument("--dir", required=True)
    p.add_argument("--channel", required=True)
    p.add_argument("--from", dest="from_block", type=int, default=0)
    p.add_argument("--to", dest="to", type=int)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("inject-fault", help="schedule a fault for the next run")
    p.add_argument("--dir", required=True)
    p.add_argument("--kind", required=True, choices=["partition", "crash", "drop"])
    p.add_argument("--target", help="comma-separated node ids")
    p.add_argument("--from-tick", type=int, default=0)
    p.add_argument("--to-tick", type=int, default=10**9)
    p.add_argument("--rate", type=float, default=0.05, help="drop rate for kind=drop")
    p.set_defaults(func=cmd_inject_fault)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
