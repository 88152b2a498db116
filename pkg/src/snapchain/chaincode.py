"""Deterministic chaincode runtime and the four built-in contracts.

Execution never touches committed state: reads are recorded with the version
they observed, writes are buffered into the read/write set. Identical inputs
must produce identical outputs on every endorser, so contract code gets its
timestamp and nonce from the proposal and uses nothing ambient.
"""

from __future__ import annotations

from dataclasses import dataclass

from .codec import decode_value, encode_value, sha256
from .identity import Identity, Role
from .ledger import ReadWriteSet, Version

PRICE_TIERS = ("personal", "editorial", "commercial")


class ChaincodeError(Exception):
    """Business-rule rejection raised during execution; produces no transaction."""

    def __init__(self, code: str, message: str = ""):
        super().__init__(message or code)
        self.code = code


class UnknownFunction(ChaincodeError):
    def __init__(self, name: str):
        super().__init__("unknown-function", f"no such chaincode function: {name}")


@dataclass(frozen=True)
class ChaincodeDescriptor:
    name: str
    channel: str
    functions: tuple[str, ...]
    endorsement_policy: int  # required matching endorsements (k of N)


class TxContext:
    """Snapshot view plus buffered effects for a single execution."""

    def __init__(self, snapshot, invoker: Identity, timestamp: int, nonce: bytes):
        self._snapshot = snapshot  # mapping key -> (value bytes, Version)
        self.invoker = invoker
        self.timestamp = timestamp
        self.nonce = nonce
        self._reads: dict[str, Version | None] = {}
        self._writes: dict[str, bytes | None] = {}

    def get(self, key: str) -> bytes | None:
        if key in self._writes:
            return self._writes[key]
        entry = self._snapshot.get(key)
        if key not in self._reads:
            self._reads[key] = entry[1] if entry else None
        return entry[0] if entry else None

    def put(self, key: str, value: bytes) -> None:
        self._writes[key] = value

    def delete(self, key: str) -> None:
        self._writes[key] = None

    def scan(self, prefix: str):
        """Keys under a prefix, sorted, with buffered writes folded in."""
        keys = set(k for k in self._snapshot if k.startswith(prefix))
        keys.update(k for k, v in self._writes.items() if k.startswith(prefix) and v is not None)
        keys -= {k for k, v in self._writes.items() if v is None}
        for key in sorted(keys):
            yield key, self.get(key)

    def rwset(self) -> ReadWriteSet:
        return ReadWriteSet(
            reads=tuple(self._reads.items()),
            writes=tuple(self._writes.items()),
        )


def get_record(ctx: TxContext, key: str) -> dict | None:
    raw = ctx.get(key)
    return decode_value(raw) if raw is not None else None


def put_record(ctx: TxContext, key: str, record: dict) -> None:
    ctx.put(key, encode_value(record))


# State key layout

def account_key(name: str) -> str:
    return "acct:" + name


def photo_key(photo_id: str) -> str:
    return "photo:" + photo_id


def wallet_key(name: str) -> str:
    return "wallet:" + name


def listing_key(photo_id: str) -> str:
    return "listing:" + photo_id


def trade_key(trade_id: str) -> str:
    return "trade:" + trade_id


def grant_key(buyer: str, photo_id: str) -> str:
    return f"grant:{buyer}:{photo_id}"


def mint_key(mint_id: str) -> str:
    return "mint:" + mint_id


def config_key(key: str) -> str:
    return "cfg:" + key


# E1: client accounts

def _create_account(ctx: TxContext, name: str, role: str, profile: dict) -> bytes:
    if not name:
        raise ChaincodeError("bad-name", "account name must be non-empty")
    key = account_key(name)
    if ctx.get(key) is not None:
        raise ChaincodeError("account-exists", f"account already exists: {name}")
    record = {
        "name": name,
        "role": role,
        "profile": profile or {},
        "registered_at": ctx.timestamp,
    }
    put_record(ctx, key, record)
    return encode_value(record)


def _get_account(ctx: TxContext, name: str) -> bytes:
    return encode_value(get_record(ctx, account_key(name)))


# E2: photo metadata

def validate_prices(prices) -> dict:
    if not isinstance(prices, dict) or sorted(prices) != sorted(PRICE_TIERS):
        raise ChaincodeError("bad-prices", f"exactly three price tiers required: {PRICE_TIERS}")
    for tier, amount in prices.items():
        if not isinstance(amount, int) or isinstance(amount, bool) or amount <= 0:
            raise ChaincodeError("bad-prices", f"price for {tier} must be a positive integer")
    return {tier: prices[tier] for tier in PRICE_TIERS}


def validate_categories(categories) -> list:
    if (not isinstance(categories, list) or not categories
            or not all(isinstance(c, str) and c for c in categories)):
        raise ChaincodeError("no-category", "at least one non-empty category required")
    return categories


def _publish(ctx: TxContext, owner: str, title: str, categories: list,
             prices: dict, blob_ref: str) -> bytes:
    if ctx.invoker.name != owner or ctx.invoker.role != Role.PHOTOGRAPHER:
        raise ChaincodeError("not-owner", "publish must be invoked by the owning photographer")
    prices = validate_prices(prices)
    categories = validate_categories(categories)
    if not blob_ref:
        raise ChaincodeError("bad-blob", "blob reference required")
    photo_id = blob_ref  # content address of the image bytes
    key = photo_key(photo_id)
    if ctx.get(key) is not None:
        raise ChaincodeError("photo-exists", f"photo already published: {photo_id}")
    record = {
        "photo_id": photo_id,
        "owner": owner,
        "title": title,
        "categories": sorted(set(categories)),
        "prices": prices,
        "blob_ref": blob_ref,
        "published_at": ctx.timestamp,
    }
    put_record(ctx, key, record)
    return encode_value(record)


def _list_by_category(ctx: TxContext, category: str) -> bytes:
    records = []
    for _, raw in ctx.scan("photo:"):
        record = decode_value(raw)
        if not category or category in record["categories"]:
            records.append(record)
    records.sort(key=lambda r: r["photo_id"])
    return encode_value(records)


def _get_photo(ctx: TxContext, photo_id: str) -> bytes:
    return encode_value(get_record(ctx, photo_key(photo_id)))


# E3: coins, listings, trades

def _mint(ctx: TxContext, recipient: str, amount: int) -> bytes:
    if ctx.invoker.role != Role.ADMIN:
        raise ChaincodeError("not-admin", "only admins may mint coins")
    if not isinstance(amount, int) or isinstance(amount, bool) or amount <= 0:
        raise ChaincodeError("bad-amount", "mint amount must be a positive integer")
    wallet = get_record(ctx, wallet_key(recipient)) or {"owner": recipient, "balance": 0}
    wallet["balance"] += amount
    put_record(ctx, wallet_key(recipient), wallet)
    mint_id = sha256(b"mint:" + ctx.nonce).hex()[:24]
    record = {"mint_id": mint_id, "admin": ctx.invoker.name, "recipient": recipient,
              "amount": amount, "minted_at": ctx.timestamp}
    put_record(ctx, mint_key(mint_id), record)
    return encode_value({"recipient": recipient, "balance": wallet["balance"]})


def _register_listing(ctx: TxContext, photo_id: str, owner: str, prices: dict) -> bytes:
    prices = validate_prices(prices)
    key = listing_key(photo_id)
    if ctx.get(key) is not None:
        raise ChaincodeError("listing-exists", f"listing already mirrored: {photo_id}")
    record = {"photo_id": photo_id, "owner": owner, "prices": prices}
    put_record(ctx, key, record)
    return encode_value(record)


def _buy(ctx: TxContext, buyer: str, photo_id: str, tier: str) -> bytes:
    if ctx.invoker.name != buyer:
        raise ChaincodeError("not-buyer", "buy must be invoked by the buyer")
    if tier not in PRICE_TIERS:
        raise ChaincodeError("bad-tier", f"unknown price tier: {tier}")
    listing = get_record(ctx, listing_key(photo_id))
    if listing is None:
        raise ChaincodeError("unknown-photo", f"no listing for photo: {photo_id}")
    seller = listing["owner"]
    if seller == buyer:
        raise ChaincodeError("self-purchase", "cannot buy your own photo")
    price = listing["prices"][tier]
    buyer_wallet = get_record(ctx, wallet_key(buyer)) or {"owner": buyer, "balance": 0}
    if buyer_wallet["balance"] < price:
        raise ChaincodeError(
            "insufficient-funds",
            f"balance {buyer_wallet['balance']} below price {price}",
        )
    seller_wallet = get_record(ctx, wallet_key(seller)) or {"owner": seller, "balance": 0}
    buyer_wallet["balance"] -= price
    seller_wallet["balance"] += price
    trade_id = sha256(b"trade:" + ctx.nonce).hex()[:24]
    trade = {
        "trade_id": trade_id,
        "buyer": buyer,
        "seller": seller,
        "photo_id": photo_id,
        "tier": tier,
        "price": price,
        "traded_at": ctx.timestamp,
    }
    put_record(ctx, wallet_key(buyer), buyer_wallet)
    put_record(ctx, wallet_key(seller), seller_wallet)
    put_record(ctx, trade_key(trade_id), trade)
    put_record(ctx, grant_key(buyer, photo_id),
               {"buyer": buyer, "photo_id": photo_id, "tier": tier, "trade_id": trade_id})
    return encode_value({"trade": trade, "balance": buyer_wallet["balance"]})


def _get_wallet(ctx: TxContext, name: str) -> bytes:
    wallet = get_record(ctx, wallet_key(name)) or {"owner": name, "balance": 0}
    return encode_value(wallet)


# E4: administration config

def _put_config(ctx: TxContext, key: str, value) -> bytes:
    if ctx.invoker.role != Role.ADMIN:
        raise ChaincodeError("not-admin", "only admins may write configuration")
    record = {"key": key, "value": value, "updated_at": ctx.timestamp}
    put_record(ctx, config_key(key), record)
    return encode_value(record)


def _get_config(ctx: TxContext, key: str) -> bytes:
    record = get_record(ctx, config_key(key))
    return encode_value(record["value"] if record else None)


_CONTRACTS: dict[str, dict[str, callable]] = {
    "clients": {"create_account": _create_account, "get_account": _get_account},
    "photos": {"publish": _publish, "list_by_category": _list_by_category,
               "get_photo": _get_photo},
    "trades": {"mint": _mint, "register_listing": _register_listing, "buy": _buy,
               "get_wallet": _get_wallet},
    "admin": {"put_config": _put_config, "get_config": _get_config},
}

# Functions that only read; the gateway serves them without ordering a transaction.
QUERY_FUNCTIONS = {"get_account", "list_by_category", "get_photo", "get_wallet", "get_config"}


def default_descriptors(channels: tuple[str, ...] = ("E1", "E2", "E3", "E4"),
                        endorsement_policy: int = 2) -> dict[str, ChaincodeDescriptor]:
    """One chaincode per channel, in the fixed E1..E4 layout."""
    names = {"E1": "clients", "E2": "photos", "E3": "trades", "E4": "admin"}
    out = {}
    for ch in channels:
        name = names.get(ch)
        if name is None:
            raise ValueError(f"no built-in chaincode for channel {ch}")
        out[ch] = ChaincodeDescriptor(
            name=name,
            channel=ch,
            functions=tuple(sorted(_CONTRACTS[name])),
            endorsement_policy=endorsement_policy,
        )
    return out


def execute(descriptor: ChaincodeDescriptor, function: str, args: tuple[bytes, ...],
            snapshot, invoker: Identity, timestamp: int = 0,
            nonce: bytes = b"") -> tuple[bytes, ReadWriteSet]:
    """Run one chaincode function against a snapshot.

    Pure in (snapshot, function, args, invoker, timestamp, nonce): repeated
    calls return byte-identical responses and read/write sets.
    """
    table = _CONTRACTS[descriptor.name]
    if function not in table:
        raise UnknownFunction(function)
    ctx = TxContext(snapshot, invoker, timestamp, nonce)
    decoded = [decode_value(a) for a in args]
    response = table[function](ctx, *decoded)
    return response, ctx.rwset()


def encode_args(*values) -> tuple[bytes, ...]:
    return tuple(encode_value(v) for v in values)
