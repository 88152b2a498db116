"""Scripted scenarios against an in-process network.

A scenario file is JSON-lines: one step object per line, executed in order.
Steps reference photos published earlier through ``save_as`` names, written
as ``$name`` wherever a photo id is expected. Any step may carry
``expect_error`` with the error code it must fail with; asserting steps
compare committed state against expectations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .chaincode import ChaincodeError
from .codec import decode_value
from .endorsement import AccessDenied, DivergentResults, InsufficientEndorsements
from .identity import BadCredential, DuplicateName, UnknownIdentity
from .network import DownloadDenied, Network, PurchaseConflict, UnknownPhoto
from .pubsub import SubscribeAccessDenied, UnknownTopic

IMAGE_PREFIX = b"\x89PNG\r\n\x1a\n"


class StepFailure(Exception):
    pass


@dataclass
class ScenarioResult:
    ok: bool
    steps_run: int
    failed_step: int | None = None
    reason: str | None = None
    final_digest: str = ""

    def summary(self) -> str:
        if self.ok:
            return f"pass ({self.steps_run} steps, digest {self.final_digest[:16]})"
        return f"fail at step {self.failed_step}: {self.reason}"


def load_scenario(path: str | Path) -> list[dict]:
    steps = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        steps.append(json.loads(line))
    return steps


def _error_code(exc: Exception) -> str:
    if isinstance(exc, ChaincodeError):
        return exc.code
    if isinstance(exc, PurchaseConflict):
        return "mvcc-conflict"
    if isinstance(exc, (AccessDenied, DownloadDenied, SubscribeAccessDenied)):
        return "access-denied"
    if isinstance(exc, BadCredential):
        return "bad-credential"
    if isinstance(exc, DuplicateName):
        return "duplicate-name"
    if isinstance(exc, UnknownIdentity):
        return "unknown-identity"
    if isinstance(exc, UnknownPhoto):
        return "unknown-photo"
    if isinstance(exc, UnknownTopic):
        return "unknown-topic"
    if isinstance(exc, (InsufficientEndorsements, DivergentResults)):
        return "endorsement-failure"
    return type(exc).__name__


class ScenarioRunner:
    def __init__(self, network: Network):
        self.net = network
        self.photos: dict[str, str] = {}  # $name -> photo id
        self.images: dict[str, bytes] = {}  # $name -> original bytes

    def _resolve_photo(self, ref: str) -> str:
        if ref.startswith("$"):
            name = ref[1:]
            if name not in self.photos:
                raise StepFailure(f"unknown photo reference {ref}")
            return self.photos[name]
        return ref

    def run(self, steps: list[dict]) -> ScenarioResult:
        for index, step in enumerate(steps):
            expect_error = step.get("expect_error")
            try:
                self._run_step(step)
            except StepFailure as exc:
                return ScenarioResult(False, index, failed_step=index, reason=str(exc))
            except Exception as exc:
                code = _error_code(exc)
                if expect_error is not None:
                    if code == expect_error:
                        continue
                    return ScenarioResult(
                        False, index, failed_step=index,
                        reason=f"expected error {expect_error}, got {code}: {exc}")
                return ScenarioResult(False, index, failed_step=index,
                                      reason=f"{code}: {exc}")
            else:
                if expect_error is not None:
                    return ScenarioResult(
                        False, index, failed_step=index,
                        reason=f"expected error {expect_error} but step succeeded")
        return ScenarioResult(True, len(steps), final_digest=self.net.state_digest())

    def _run_step(self, step: dict) -> None:
        op = step.get("op")
        handler = getattr(self, "_op_" + op.replace("-", "_"), None) if op else None
        if handler is None:
            raise StepFailure(f"unknown scenario op: {op}")
        handler(step)

    def _handle(self, name: str):
        handle = self.net.handles.get(name)
        if handle is None:
            raise StepFailure(f"no such actor: {name} (register it first)")
        return handle

    def _op_register(self, step: dict) -> None:
        self.net.register_client(step["name"], step["role"], step["secret"],
                                 profile=step.get("profile"))

    def _op_login(self, step: dict) -> None:
        self.net.login(step["name"], step["secret"])

    def _op_mint(self, step: dict) -> None:
        self.net.mint(self.net.admin_handle, step["to"], step["amount"])

    def _op_put_config(self, step: dict) -> None:
        self.net.put_config(self.net.admin_handle, step["key"], step["value"])

    def _op_publish(self, step: dict) -> None:
        owner = self._handle(step["owner"])
        image = IMAGE_PREFIX + step.get("image_text", step.get("title", "")).encode()
        photo_id = self.net.publish_photo(owner, step.get("title", ""),
                                          step["categories"], step["prices"], image)
        if "save_as" in step:
            self.photos[step["save_as"]] = photo_id
            self.images[step["save_as"]] = image

    def _op_subscribe(self, step: dict) -> None:
        self.net.subscribe(self._handle(step["name"]), step["topic"])

    def _op_buy(self, step: dict) -> None:
        buyer = self._handle(step["buyer"])
        self.net.buy(buyer, self._resolve_photo(step["photo"]), step["tier"])

    def _op_poll(self, step: dict) -> None:
        events, _cursor = self.net.poll(step["name"], step["topic"])
        if "expect_count" in step and len(events) != step["expect_count"]:
            raise StepFailure(
                f"poll returned {len(events)} events, expected {step['expect_count']}")

    def _op_download(self, step: dict) -> None:
        handle = self._handle(step["name"])
        data = self.net.download(handle, self._resolve_photo(step["photo"]))
        ref = step.get("expect_bytes_of")
        if ref is not None:
            name = ref[1:] if ref.startswith("$") else ref
            if self.images.get(name) != data:
                raise StepFailure(f"downloaded bytes differ from published {ref}")

    def _op_assert_balance(self, step: dict) -> None:
        balance = self.net.wallet_balance(step["name"])
        if balance != step["equals"]:
            raise StepFailure(
                f"wallet {step['name']} holds {balance}, expected {step['equals']}")

    def _op_assert_state(self, step: dict) -> None:
        channel = step["channel"]
        key = step["key"]
        if "$" in key:  # allow keys like "photo:$p1"
            for name, photo_id in self.photos.items():
                key = key.replace("$" + name, photo_id)
        entry = self.net.reference_peer.get_state(channel, key)
        if step.get("absent"):
            if entry is not None:
                raise StepFailure(f"{channel}:{key} expected absent but exists")
            return
        if entry is None:
            raise StepFailure(f"{channel}:{key} not found")
        record = decode_value(entry[0])
        for field_name, expected in step.get("expect", {}).items():
            actual = record.get(field_name) if isinstance(record, dict) else None
            if actual != expected:
                raise StepFailure(
                    f"{channel}:{key}.{field_name} = {actual!r}, expected {expected!r}")

    def _op_partition(self, step: dict) -> None:
        self.net.partition(set(step["nodes"]), duration=step.get("duration", 1000),
                           start=step.get("start"))

    def _op_heal(self, step: dict) -> None:
        self.net.heal()

    def _op_crash_node(self, step: dict) -> None:
        self.net.crash(step["node"], duration=step.get("duration", 1000),
                       start=step.get("start"))

    def _op_advance_ticks(self, step: dict) -> None:
        self.net.run(step["n"])


def run_scenario(network: Network, steps: list[dict]) -> ScenarioResult:
    return ScenarioRunner(network).run(steps)
