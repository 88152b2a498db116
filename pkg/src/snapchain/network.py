"""In-process network: peers, orderers, and the client-side pipeline.

Simulation mode runs every component single-threaded over the seeded
simulated network, which makes whole workloads reproducible: the same config
and seed give the same chains, byte for byte. The HTTP gateway wraps this
same object and pumps it from request handlers.

Client operations drive the full execute/order/validate pipeline: sign a
proposal, fan out to endorsers, assemble a transaction, submit it to the
Raft leader, then advance the simulation until the reference peer commits it
and reports its validation flag. Endorsement fan-out is a synchronous loop
over the in-process peers (a response deadline only matters across real
sockets); ordering and block delivery run through the simulated network,
which is where partitions, drops, and crashes bite.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import endorsement as endorse_mod
from .blobstore import BlobStore, DirectoryBlobStore, content_address
from .chaincode import (
    ChaincodeError,
    default_descriptors,
    encode_args,
    execute,
    validate_categories,
    validate_prices,
)
from .codec import decode_value, sha256
from .endorsement import (
    DivergentResults,
    EndorsementPolicy,
    InsufficientEndorsements,
    Proposal,
    SimulationResult,
    assemble_transaction,
    create_proposal,
)
from .identity import (
    AccessMode,
    Identity,
    Keypair,
    MembershipRegistry,
    Role,
)
from .ledger import FLAG_VALID, Transaction, encode_block
from .ordering import BlockCutConfig, OrdererNode
from .peer import Peer
from .pubsub import PublishEvent, Subscription, SubscriptionStore
from .simnet import SimNet, SimNetConfig, Simulation

LEADER_WAIT_TICKS = 20000
DEFAULT_INVOKE_TIMEOUT = 20000
CATEGORY_WHITELIST_KEY = "categories"


class NetworkError(Exception):
    pass


class BadConfig(NetworkError):
    pass


class NotCommitted(NetworkError):
    """The transaction did not commit within the tick budget."""


class PurchaseConflict(NetworkError):
    """A buy lost a read/write race and retries could not complete it."""


class DownloadDenied(NetworkError):
    pass


class UnknownPhoto(NetworkError):
    pass


@dataclass
class NetworkConfig:
    seed: int = 7
    endorser_count: int = 6
    orderer_count: int = 3
    channels: tuple[str, ...] = ("E1", "E2", "E3", "E4")
    endorsement_required: int = 2
    block_cut: BlockCutConfig = field(default_factory=BlockCutConfig)
    simnet: SimNetConfig = field(default_factory=SimNetConfig)
    session_ttl: float = 3600.0
    admin_name: str = "admin"
    admin_secret: str = "admin-secret"
    data_dir: str | None = None

    def validate(self) -> None:
        if self.endorser_count < 1 or self.orderer_count < 1:
            raise BadConfig("endorser and orderer counts must be at least 1")
        if not self.channels:
            raise BadConfig("at least one channel required")
        if not 1 <= self.endorsement_required <= self.endorser_count:
            raise BadConfig("endorsement_required must be within 1..endorser_count")

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "endorser_count": self.endorser_count,
            "orderer_count": self.orderer_count,
            "channels": list(self.channels),
            "endorsement_required": self.endorsement_required,
            "block_cut": {"max_tx_count": self.block_cut.max_tx_count,
                          "max_wait": self.block_cut.max_wait},
            "simnet": {"seed": self.simnet.seed, "delay_min": self.simnet.delay_min,
                       "delay_max": self.simnet.delay_max, "drop_rate": self.simnet.drop_rate},
            "session_ttl": self.session_ttl,
            "admin_name": self.admin_name,
        }

    @classmethod
    def from_json(cls, doc: dict, **overrides) -> "NetworkConfig":
        kwargs = {}
        for key in ("seed", "endorser_count", "orderer_count", "endorsement_required",
                    "session_ttl", "admin_name", "admin_secret", "data_dir"):
            if key in doc:
                kwargs[key] = doc[key]
        if "channels" in doc:
            kwargs["channels"] = tuple(doc["channels"])
        if "block_cut" in doc:
            kwargs["block_cut"] = BlockCutConfig(**doc["block_cut"])
        if "simnet" in doc:
            kwargs["simnet"] = SimNetConfig(**doc["simnet"])
        kwargs.update(overrides)
        return cls(**kwargs)


@dataclass
class ClientHandle:
    identity: Identity
    signer: Keypair

    @property
    def name(self) -> str:
        return self.identity.name


@dataclass
class PendingInvoke:
    tx: Transaction
    response: bytes
    submitted: bool = False
    last_submit: int = -(10**9)
    flag: str | None = None
    block_num: int | None = None
    tx_index: int | None = None

    @property
    def resolved(self) -> bool:
        return self.flag is not None

    @property
    def valid(self) -> bool:
        return self.flag == FLAG_VALID

    def decoded_response(self):
        return decode_value(self.response)


def _infra_keypair(seed: int, name: str) -> Keypair:
    return Keypair.from_seed(sha256(f"infra:{seed}:{name}".encode()))


class Network:
    def __init__(self, cfg: NetworkConfig):
        cfg.validate()
        self.cfg = cfg
        self.data_dir = Path(cfg.data_dir) if cfg.data_dir else None

        simnet_cfg = cfg.simnet
        if simnet_cfg.seed == 0 and cfg.seed != 0:
            simnet_cfg = replace(simnet_cfg, seed=cfg.seed)
        self.net = SimNet(simnet_cfg)
        self.sim = Simulation(self.net)

        self.msp = MembershipRegistry(cfg.channels, cfg.session_ttl,
                                      rng=random.Random(cfg.seed * 7_368_787 + 1))
        self._load_msp()
        self.descriptors = default_descriptors(cfg.channels, cfg.endorsement_required)
        self.policy = EndorsementPolicy(cfg.endorsement_required)
        self.subscriptions = SubscriptionStore(self.msp)

        if self.data_dir:
            self.blobstore: BlobStore = DirectoryBlobStore(self.data_dir / "blobs")
        else:
            self.blobstore = BlobStore()

        self.peers: list[Peer] = []
        for i in range(cfg.endorser_count):
            name = f"peer{i}"
            keypair = _infra_keypair(cfg.seed, name)
            identity = self._infra_identity(name, Role.PEER, keypair)
            store = None
            if self.data_dir and i == 0:
                store = self.data_dir / "chains"
                store.mkdir(parents=True, exist_ok=True)
            self.peers.append(Peer(identity, keypair, self.msp, self.descriptors,
                                   self.policy, store_dir=store))
        self._preload_followers()

        peer_ids = tuple(f"peer{i}" for i in range(cfg.endorser_count))
        orderer_ids = tuple(f"orderer{i}" for i in range(cfg.orderer_count))
        self.orderers: dict[str, OrdererNode] = {}
        for i, oid in enumerate(orderer_ids):
            keypair = _infra_keypair(cfg.seed, oid)
            self._infra_identity(oid, Role.ORDERER, keypair)
            rng = random.Random(cfg.seed * 1_000_003 + i)
            node = OrdererNode(oid, orderer_ids, peer_ids, cfg.channels,
                               cfg.block_cut, rng)
            self._bootstrap_orderer(node)
            self.orderers[oid] = node
            self.sim.add_node(oid, node)
        for i, pid in enumerate(peer_ids):
            self.sim.add_node(pid, self.peers[i])

        total_height = sum(l.height for l in self.reference_peer.ledgers.values())
        self._rng = random.Random(cfg.seed * 2_654_435_761 + total_height)
        self._resubmit_after = cfg.block_cut.max_wait + 500
        self.handles: dict[str, ClientHandle] = {}
        self._load_client_keys()
        self._pending: list[PendingInvoke] = []

    # Setup helpers

    @property
    def reference_peer(self) -> Peer:
        return self.peers[0]

    @property
    def now(self) -> int:
        return self.sim.now

    def _infra_identity(self, name: str, role: Role, keypair: Keypair) -> Identity:
        if self.msp.exists(name):
            return self.msp.get(name)
        return self.msp.register_identity(name, role, keypair.public_hex)

    def _preload_followers(self) -> None:
        source = self.reference_peer
        for follower in self.peers[1:]:
            for channel, ledger in source.ledgers.items():
                for block in ledger.blocks[1:]:
                    if block.number >= follower.height(channel):
                        follower.commit_block(channel, clone_block(block))

    def _bootstrap_orderer(self, node: OrdererNode) -> None:
        for channel, ledger in self.reference_peer.ledgers.items():
            if ledger.height > 1:
                encoded = [encode_block(b) for b in ledger.blocks[1:]]
                node.bootstrap(channel, encoded, ledger.blocks[-1].header_hash())

    def _load_msp(self) -> None:
        if not self.data_dir:
            return
        registry = self.data_dir / "msp.jsonl"
        creds = self.data_dir / "credentials.json"
        if registry.exists():
            self.msp.load(registry, creds)

    def _persist_msp(self) -> None:
        if not self.data_dir:
            return
        self.msp.save(self.data_dir / "msp.jsonl", self.data_dir / "credentials.json")

    def _load_client_keys(self) -> None:
        if not self.data_dir:
            return
        path = self.data_dir / "client_keys.json"
        if not path.exists():
            return
        for name, seed_hex in json.loads(path.read_text()).items():
            keypair = Keypair.from_seed(bytes.fromhex(seed_hex))
            self.handles[name] = ClientHandle(self.msp.get(name), keypair)

    def _persist_client_keys(self) -> None:
        if not self.data_dir:
            return
        doc = {name: h.signer.private_hex() for name, h in self.handles.items()}
        (self.data_dir / "client_keys.json").write_text(json.dumps(doc, sort_keys=True))

    # Simulation control

    def up(self, max_ticks: int = LEADER_WAIT_TICKS) -> None:
        """Run until the ordering service has a leader; seed the admin client."""
        if not self.sim.run_until(lambda: self.current_leader() is not None, max_ticks):
            raise NetworkError("no ordering leader elected within budget")
        if self.cfg.admin_name not in self.handles:
            self.register_client(self.cfg.admin_name, Role.ADMIN, self.cfg.admin_secret)

    def current_leader(self) -> OrdererNode | None:
        alive = [o for o in self.orderers.values()
                 if o.is_leader and not self.net.crashed(o.node_id, self.sim.now)]
        if not alive:
            return None
        return max(alive, key=lambda o: o.raft.term)

    def run(self, ticks: int) -> None:
        for _ in range(ticks):
            self.sim.step()
            self._service_pending()

    def run_until(self, predicate, max_ticks: int) -> bool:
        for _ in range(max_ticks):
            if predicate():
                return True
            self.sim.step()
            self._service_pending()
        return predicate()

    def _service_pending(self) -> None:
        if not self._pending:
            return
        index = self.reference_peer.tx_index
        still = []
        for p in self._pending:
            hit = index.get(p.tx.tx_id)
            if hit is not None:
                _, p.block_num, p.tx_index, p.flag = hit
                continue
            if not p.submitted or self.sim.now - p.last_submit >= self._resubmit_after:
                self._try_submit(p)
            still.append(p)
        self._pending = still

    def _try_submit(self, p: PendingInvoke) -> None:
        leader = self.current_leader()
        if leader is None:
            return
        status, _ = leader.submit_tx(p.tx.channel, p.tx, self.sim.now)
        if status == "accepted":
            p.submitted = True
            p.last_submit = self.sim.now

    # Client lifecycle

    def register_client(self, name: str, role: Role | str, secret: str,
                        profile: dict | None = None) -> ClientHandle:
        if not isinstance(role, Role):
            role = Role(role)
        keypair = Keypair.from_seed(sha256(f"client:{self.cfg.seed}:{name}".encode()))
        identity = self.msp.register_identity(name, role, keypair.public_hex, secret=secret)
        handle = ClientHandle(identity, keypair)
        self.handles[name] = handle
        result = self.invoke(handle, "E1", "create_account",
                             encode_args(name, role.value, profile or {}))
        if not result.valid:
            raise NetworkError(f"account creation for {name} flagged {result.flag}")
        self._persist_msp()
        self._persist_client_keys()
        return handle

    def login(self, name: str, secret: str):
        return self.msp.authenticate(name, secret)

    # Pipeline

    def _endorse(self, proposal: Proposal) -> tuple[list[SimulationResult], list[Exception]]:
        """Fan out to every endorser; business failures are collected, not raised."""
        results: list[SimulationResult] = []
        failures: list[Exception] = []
        for peer in self.peers:
            try:
                results.append(peer.simulate(proposal))
            except ChaincodeError as exc:
                failures.append(exc)
        return results, failures

    def invoke_async(self, handle: ClientHandle, channel: str, function: str,
                     args: tuple[bytes, ...]) -> PendingInvoke:
        proposal = create_proposal(
            handle.identity, handle.signer, channel, self.descriptors[channel].name,
            function, args, timestamp=self.sim.now, msp=self.msp,
            nonce=self._rng.randbytes(16),
        )
        tx, results = self._endorse_and_assemble(proposal)
        winning = tx.endorsements[0][1]
        response = next(r.response for r in results
                        if r.endorsement.result_digest == winning)
        pending = PendingInvoke(tx=tx, response=response)
        self._pending.append(pending)
        self._try_submit(pending)
        return pending

    def _endorse_and_assemble(self, proposal):
        """Collect endorsements, retrying while lagging peers catch up.

        Endorsers simulate on their own committed snapshots, so right after a
        commit some may still be a block behind the freshest peer: they fail
        or diverge where it succeeds. Mixed outcomes get a short, bounded
        retry to let block delivery converge; a unanimous business failure is
        genuine and surfaces immediately.
        """
        results, failures = self._endorse(proposal)
        for _ in range(3):
            if not (results and failures and len(results) < self.policy.required):
                break
            self.run(150)
            results, failures = self._endorse(proposal)
        if not results and failures:
            raise failures[0]
        try:
            return assemble_transaction(proposal, results, self.policy), results
        except DivergentResults:
            self.run(self.cfg.block_cut.max_wait // 2)
            results, failures = self._endorse(proposal)
            if not results and failures:
                raise failures[0]
        except InsufficientEndorsements:
            if failures:
                raise failures[0]
            raise
        try:
            return assemble_transaction(proposal, results, self.policy), results
        except (DivergentResults, InsufficientEndorsements):
            if failures:
                raise failures[0]
            raise

    def invoke(self, handle: ClientHandle, channel: str, function: str,
               args: tuple[bytes, ...], timeout: int = DEFAULT_INVOKE_TIMEOUT) -> PendingInvoke:
        pending = self.invoke_async(handle, channel, function, args)
        if not self.run_until(lambda: pending.resolved, timeout):
            raise NotCommitted(f"{function} on {channel} not committed in {timeout} ticks")
        return pending

    def query(self, handle: ClientHandle, channel: str, function: str, args: tuple[bytes, ...]):
        """Read-only chaincode evaluation on the reference peer; no transaction."""
        if not self.msp.check_channel_access(handle.identity, channel, AccessMode.READ):
            raise endorse_mod.AccessDenied(f"{handle.name} may not read {channel}")
        response, _ = execute(self.descriptors[channel], function, args,
                              self.reference_peer.ledgers[channel].state,
                              handle.identity, timestamp=self.sim.now, nonce=b"")
        return decode_value(response)

    # Marketplace operations (shared by the HTTP gateway and the scenario runner)

    @property
    def admin_handle(self) -> ClientHandle:
        return self.handles[self.cfg.admin_name]

    def mint(self, admin: ClientHandle, recipient: str, amount: int) -> int:
        if not self.msp.exists(recipient):
            raise ChaincodeError("unknown-recipient", f"no such account: {recipient}")
        result = self.invoke(admin, "E3", "mint", encode_args(recipient, amount))
        if not result.valid:
            raise NetworkError(f"mint flagged {result.flag}")
        return result.decoded_response()["balance"]

    def category_whitelist(self) -> list[str] | None:
        entry = self.reference_peer.get_state("E4", "cfg:" + CATEGORY_WHITELIST_KEY)
        if entry is None:
            return None
        return decode_value(entry[0])["value"]

    def publish_photo(self, handle: ClientHandle, title: str, categories: list[str],
                      prices: dict, image: bytes) -> str:
        validate_prices(prices)
        validate_categories(categories)
        whitelist = self.category_whitelist()
        if whitelist is not None:
            unknown = [c for c in categories if c not in whitelist]
            if unknown:
                raise ChaincodeError("no-category", f"categories not configured: {unknown}")
        photo_id = content_address(image)
        if self.reference_peer.get_state("E2", "photo:" + photo_id) is not None:
            raise ChaincodeError("photo-exists", f"photo already published: {photo_id}")
        self.blobstore.put(image)
        result = self.invoke(handle, "E2", "publish",
                             encode_args(handle.name, title, categories, prices, photo_id))
        if result.flag == "mvcc-conflict":
            # The only contended key is the photo's absence probe: a concurrent
            # publish of the same bytes won the race.
            raise ChaincodeError("photo-exists", f"photo already published: {photo_id}")
        if not result.valid:
            raise NetworkError(f"publish flagged {result.flag}")
        listing = self.invoke(self.admin_handle, "E3", "register_listing",
                              encode_args(photo_id, handle.name, prices))
        if not listing.valid:
            raise NetworkError(f"listing mirror flagged {listing.flag}")
        return photo_id

    def buy(self, handle: ClientHandle, photo_id: str, tier: str, retries: int = 2) -> dict:
        """Drive a purchase; on an MVCC conflict re-endorse up to ``retries`` times.

        A conflict that cannot be recovered (including a retry that now fails
        funding) surfaces as PurchaseConflict: the submitted transaction's
        committed fate was the conflict.
        """
        result = self.invoke(handle, "E3", "buy", encode_args(handle.name, photo_id, tier))
        if result.valid:
            return result.decoded_response()
        if result.flag != "mvcc-conflict":
            raise NetworkError(f"buy flagged {result.flag}")
        for _ in range(retries):
            try:
                result = self.invoke(handle, "E3", "buy",
                                     encode_args(handle.name, photo_id, tier))
            except ChaincodeError as exc:
                raise PurchaseConflict(
                    f"purchase lost a concurrent update race ({exc.code})") from exc
            if result.valid:
                return result.decoded_response()
        raise PurchaseConflict("purchase kept conflicting with concurrent updates")

    def wallet_balance(self, name: str) -> int:
        entry = self.reference_peer.get_state("E3", "wallet:" + name)
        if entry is None:
            return 0
        return decode_value(entry[0])["balance"]

    def photo_listing(self, handle: ClientHandle, category: str = "") -> list[dict]:
        photos = self.query(handle, "E2", "list_by_category", encode_args(category))
        for record in photos:
            acct = self.reference_peer.get_state("E1", "acct:" + record["owner"])
            record["owner_profile"] = decode_value(acct[0])["profile"] if acct else {}
        return photos

    def download(self, handle: ClientHandle, photo_id: str) -> bytes:
        photo = self.reference_peer.get_state("E2", "photo:" + photo_id)
        if photo is None:
            raise UnknownPhoto(f"no such photo: {photo_id}")
        record = decode_value(photo[0])
        if record["owner"] != handle.name:
            grant = self.reference_peer.get_state("E3", f"grant:{handle.name}:{photo_id}")
            if grant is None:
                raise DownloadDenied(f"{handle.name} holds no grant for {photo_id}")
        blob = self.blobstore.get(record["blob_ref"])
        if blob is None:
            raise UnknownPhoto(f"blob missing for {photo_id}")
        return blob

    def subscribe(self, handle: ClientHandle, topic: str) -> Subscription:
        whitelist = self.category_whitelist()
        self.subscriptions.set_whitelist(whitelist)
        return self.subscriptions.subscribe(handle.identity, topic,
                                            self.reference_peer.height("E2"))

    def poll(self, name: str, topic: str,
             cursor: int | None = None) -> tuple[list[PublishEvent], int]:
        if cursor is not None:
            sub = Subscription(subscriber=name, topic=topic, cursor=cursor)
        else:
            sub = self.subscriptions.get(name, topic) or Subscription(name, topic, 0)
        events, advanced = self.subscriptions.poll(sub, self.reference_peer)
        return events, advanced.cursor

    def put_config(self, admin: ClientHandle, key: str, value) -> None:
        result = self.invoke(admin, "E4", "put_config", encode_args(key, value))
        if not result.valid:
            raise NetworkError(f"put_config flagged {result.flag}")

    # Fault injection

    def partition(self, group, duration: int, start: int | None = None) -> None:
        begin = self.sim.now if start is None else start
        self.net.add_partition(begin, begin + duration, group)

    def heal(self) -> None:
        self.net.heal_partitions(self.sim.now)

    def crash(self, node_id: str, duration: int, start: int | None = None) -> None:
        begin = self.sim.now if start is None else start
        self.net.add_crash(begin, begin + duration, node_id)

    # Introspection

    def heights(self) -> dict[str, int]:
        return {ch: self.reference_peer.height(ch) for ch in self.cfg.channels}

    def state_digest(self) -> str:
        """Digest of every channel's tip hash and full world state on the reference peer."""
        parts = []
        for channel in self.cfg.channels:
            ledger = self.reference_peer.ledgers[channel]
            parts.append(channel.encode())
            parts.append(ledger.tip_hash())
            for key in sorted(ledger.state):
                value, version = ledger.state[key]
                parts.append(key.encode())
                parts.append(value)
                parts.append(f"{version[0]}:{version[1]}".encode())
        return sha256(b"".join(parts)).hex()


def clone_block(block):
    """Deep, independent copy of a block via its canonical encoding."""
    from .ledger import decode_block

    return decode_block(encode_block(block))
