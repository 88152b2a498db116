"""Seeded discrete-event network simulation.

All inter-node traffic in tests flows through here: messages get a random
per-link delay, may be dropped, and are cut off entirely while a partition
window separates sender and receiver or while either end is crashed. The
same seed and fault schedule always produce the same delivery order, which
is what makes whole-network runs reproducible.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, replace
from pathlib import Path


@dataclass(frozen=True)
class PartitionWindow:
    start: int
    end: int
    group: frozenset  # node ids isolated from everyone outside the group

    def active(self, now: int) -> bool:
        return self.start <= now < self.end

    def separates(self, a: str, b: str, now: int) -> bool:
        return self.active(now) and ((a in self.group) != (b in self.group))


@dataclass(frozen=True)
class CrashWindow:
    start: int
    end: int
    node: str

    def active(self, now: int) -> bool:
        return self.start <= now < self.end


@dataclass
class SimNetConfig:
    seed: int = 0
    delay_min: int = 1
    delay_max: int = 5
    drop_rate: float = 0.0
    partitions: tuple[PartitionWindow, ...] = ()
    crashes: tuple[CrashWindow, ...] = ()

    def __post_init__(self):
        if self.delay_min < 1 or self.delay_max < self.delay_min:
            raise ValueError("delays must satisfy 1 <= delay_min <= delay_max")
        if not 0.0 <= self.drop_rate < 1.0:
            raise ValueError("drop_rate must be in [0, 1)")


def save_sim_scenario(cfg: SimNetConfig, node_count: int, path: str | Path) -> None:
    doc = {
        "seed": cfg.seed,
        "node_count": node_count,
        "delay_min": cfg.delay_min,
        "delay_max": cfg.delay_max,
        "drop_rate": cfg.drop_rate,
        "partitions": [[p.start, p.end, sorted(p.group)] for p in cfg.partitions],
        "crashes": [[c.start, c.end, c.node] for c in cfg.crashes],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_sim_scenario(path: str | Path) -> tuple[SimNetConfig, int]:
    doc = json.loads(Path(path).read_text())
    cfg = SimNetConfig(
        seed=doc["seed"],
        delay_min=doc.get("delay_min", 1),
        delay_max=doc.get("delay_max", 5),
        drop_rate=doc.get("drop_rate", 0.0),
        partitions=tuple(
            PartitionWindow(s, e, frozenset(group)) for s, e, group in doc.get("partitions", [])
        ),
        crashes=tuple(CrashWindow(s, e, n) for s, e, n in doc.get("crashes", [])),
    )
    return cfg, doc["node_count"]


class SimNet:
    """Message fabric between named nodes."""

    def __init__(self, cfg: SimNetConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self._queue: list[tuple[int, int, str, str, object]] = []
        self._seq = 0
        self.partitions: list[PartitionWindow] = list(cfg.partitions)
        self.crashes: list[CrashWindow] = list(cfg.crashes)
        self.sent = 0
        self.dropped = 0

    def add_partition(self, start: int, end: int, group) -> None:
        self.partitions.append(PartitionWindow(start, end, frozenset(group)))

    def heal_partitions(self, now: int) -> None:
        """End every active partition window at the current tick."""
        self.partitions = [
            p if not p.active(now) else replace(p, end=now) for p in self.partitions
        ]

    def add_crash(self, start: int, end: int, node: str) -> None:
        self.crashes.append(CrashWindow(start, end, node))

    def crashed(self, node: str, now: int) -> bool:
        return any(c.node == node and c.active(now) for c in self.crashes)

    def partitioned(self, a: str, b: str, now: int) -> bool:
        return any(p.separates(a, b, now) for p in self.partitions)

    def send(self, src: str, dst: str, msg, now: int) -> None:
        self.sent += 1
        if self.partitioned(src, dst, now) or self.crashed(src, now):
            self.dropped += 1
            return
        if self.cfg.drop_rate and self.rng.random() < self.cfg.drop_rate:
            self.dropped += 1
            return
        delay = self.rng.randint(self.cfg.delay_min, self.cfg.delay_max)
        self._seq += 1
        heapq.heappush(self._queue, (now + delay, self._seq, dst, src, msg))

    def due(self, now: int) -> list[tuple[str, str, object]]:
        """Deliveries scheduled up to and including this tick, in order."""
        out = []
        while self._queue and self._queue[0][0] <= now:
            _, _, dst, src, msg = heapq.heappop(self._queue)
            out.append((dst, src, msg))
        return out


class Simulation:
    """Tick loop driving a set of node handlers over one SimNet.

    A handler exposes ``handle(src, msg, now) -> [(dst, msg)]`` and
    ``tick(now) -> [(dst, msg)]``; optionally ``on_recover(now)`` invoked on
    the first tick after a crash window ends.
    """

    def __init__(self, net: SimNet):
        self.net = net
        self.now = 0
        self.handlers: dict[str, object] = {}
        self._was_crashed: set[str] = set()
        # Optional callable invoked after every step; the HTTP gateway hooks
        # this to yield its lock so concurrent requests can interleave.
        self.pump_gate = None

    def add_node(self, node_id: str, handler) -> None:
        self.handlers[node_id] = handler

    def step(self) -> None:
        now = self.now
        for dst, src, msg in self.net.due(now):
            if self.net.crashed(dst, now):
                continue
            for out_dst, out_msg in self.handlers[dst].handle(src, msg, now):
                self.net.send(dst, out_dst, out_msg, now)
        for node_id in sorted(self.handlers):
            handler = self.handlers[node_id]
            if self.net.crashed(node_id, now):
                self._was_crashed.add(node_id)
                continue
            if node_id in self._was_crashed:
                self._was_crashed.discard(node_id)
                recover = getattr(handler, "on_recover", None)
                if recover is not None:
                    recover(now)
            for out_dst, out_msg in handler.tick(now):
                self.net.send(node_id, out_dst, out_msg, now)
        self.now += 1
        if self.pump_gate is not None:
            self.pump_gate()

    def run(self, ticks: int) -> None:
        for _ in range(ticks):
            self.step()

    def run_until(self, predicate, max_ticks: int) -> bool:
        """Advance until the predicate holds; False if the budget runs out."""
        for _ in range(max_ticks):
            if predicate():
                return True
            self.step()
        return predicate()
