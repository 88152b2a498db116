"""HTTP facade over an in-process network.

Handlers share one network under a single lock, but the lock is released at
every simulation step boundary (the pump gate), so a second request can get
its proposal endorsed while the first is still waiting for its block. That
interleaving is what lets two concurrent purchases race the same wallet the
way separate clients would.

The gateway custodies client signing keys: browsers authenticate with a
bearer token and the gateway signs proposals on their behalf.

All request and response bodies are JSON; images travel base64-encoded on
upload and raw on download. Errors carry {code, message}.
"""

from __future__ import annotations

import base64
import binascii
import json
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .chaincode import ChaincodeError, PRICE_TIERS
from .endorsement import AccessDenied
from .identity import BadCredential, DuplicateName, Role, UnknownIdentity, UnknownRole
from .network import (
    DownloadDenied,
    Network,
    NetworkError,
    NotCommitted,
    PurchaseConflict,
    UnknownPhoto,
)
from .pubsub import SubscribeAccessDenied, UnknownTopic

MAX_IMAGE_BYTES = 25 * 1024 * 1024
IMAGE_SIGNATURES = (
    b"\x89PNG\r\n\x1a\n",
    b"\xff\xd8\xff",
    b"GIF87a",
    b"GIF89a",
    b"BM",
    b"RIFF",
)

_CHAINCODE_STATUS = {
    "insufficient-funds": 402,
    "unknown-photo": 404,
    "unknown-recipient": 404,
    "photo-exists": 409,
    "account-exists": 409,
    "listing-exists": 409,
    "not-admin": 403,
    "not-owner": 403,
    "not-buyer": 403,
}


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code


def _to_api_error(exc: Exception) -> ApiError:
    if isinstance(exc, ApiError):
        return exc
    if isinstance(exc, BadCredential):
        return ApiError(401, "bad-credential", str(exc))
    if isinstance(exc, UnknownIdentity):
        return ApiError(404, "unknown-identity", str(exc))
    if isinstance(exc, DuplicateName):
        return ApiError(409, "duplicate-name", str(exc))
    if isinstance(exc, UnknownRole):
        return ApiError(400, "unknown-role", str(exc))
    if isinstance(exc, (AccessDenied, SubscribeAccessDenied, DownloadDenied)):
        return ApiError(403, "access-denied", str(exc))
    if isinstance(exc, UnknownTopic):
        return ApiError(400, "unknown-topic", str(exc))
    if isinstance(exc, UnknownPhoto):
        return ApiError(404, "unknown-photo", str(exc))
    if isinstance(exc, PurchaseConflict):
        return ApiError(409, "mvcc-conflict", str(exc))
    if isinstance(exc, ChaincodeError):
        return ApiError(_CHAINCODE_STATUS.get(exc.code, 400), exc.code, str(exc))
    if isinstance(exc, NotCommitted):
        return ApiError(504, "not-committed", str(exc))
    if isinstance(exc, NetworkError):
        return ApiError(500, "network-error", str(exc))
    return ApiError(500, "internal-error", f"{type(exc).__name__}: {exc}")


@dataclass
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 0  # 0 picks an ephemeral port
    max_image_bytes: int = MAX_IMAGE_BYTES
    pump_sleep: float = 0.0  # wall seconds yielded per simulation step
    ui_dir: str | None = None


class Gateway:
    def __init__(self, network: Network, cfg: GatewayConfig | None = None):
        self.network = network
        self.cfg = cfg or GatewayConfig()
        self._lock = threading.RLock()
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None
        network.sim.pump_gate = self._pump_gate

    def _pump_gate(self) -> None:
        """Called between simulation steps: let other handlers interleave."""
        self._lock.release()
        if self.cfg.pump_sleep:
            time.sleep(self.cfg.pump_sleep)
        self._lock.acquire()

    # Lifecycle

    def start(self) -> tuple[str, int]:
        handler = _make_handler(self)
        self._server = ThreadingHTTPServer((self.cfg.host, self.cfg.port), handler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self._server.server_address

    def stop(self) -> None:
        if self._server:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    # Request implementations (called with self._lock held)

    def _handle_auth(self, token: str | None):
        if not token:
            raise ApiError(401, "missing-token", "Authorization: Bearer token required")
        identity = self.network.msp.resolve_token(token)
        handle = self.network.handles.get(identity.name)
        if handle is None:
            raise ApiError(401, "no-signing-key", f"gateway holds no key for {identity.name}")
        return handle

    def op_register(self, body: dict) -> tuple[int, dict]:
        role = body.get("role", "")
        if role not in (Role.PHOTOGRAPHER.value, Role.CUSTOMER.value):
            raise ApiError(400, "unknown-role",
                           "role must be 'photographer' or 'customer'")
        name = body.get("name", "")
        secret = body.get("secret", "")
        if not name or not secret:
            raise ApiError(400, "bad-request", "name and secret are required")
        handle = self.network.register_client(name, role, secret,
                                              profile=body.get("profile") or {})
        return 201, {"name": handle.name, "role": role}

    def op_login(self, body: dict) -> tuple[int, dict]:
        token = self.network.login(body.get("name", ""), body.get("credential", ""))
        handle = self.network.handles[token.subject]
        photos = self.network.photo_listing(handle, "")
        return 200, {
            "token": token.token,
            "name": token.subject,
            "role": handle.identity.role.value,
            "expires_at": token.expires_at,
            "photos": photos,
        }

    def op_logout(self, token: str | None) -> tuple[int, dict]:
        if token:
            self.network.msp.revoke_token(token)
        return 200, {"ok": True}

    def op_list_photos(self, handle, category: str) -> tuple[int, dict]:
        return 200, {"photos": self.network.photo_listing(handle, category)}

    def op_upload(self, handle, body: dict) -> tuple[int, dict]:
        if handle.identity.role != Role.PHOTOGRAPHER:
            raise ApiError(403, "not-photographer", "only photographers may upload")
        try:
            image = base64.b64decode(body.get("image_b64", ""), validate=True)
        except (binascii.Error, ValueError):
            raise ApiError(400, "bad-image", "image_b64 is not valid base64")
        if not image or len(image) > self.cfg.max_image_bytes:
            raise ApiError(400, "bad-image",
                           f"image must be 1..{self.cfg.max_image_bytes} bytes")
        if not image.startswith(IMAGE_SIGNATURES):
            raise ApiError(400, "bad-image", "unrecognized raster image format")
        prices = body.get("prices")
        if not isinstance(prices, dict):
            raise ApiError(400, "bad-prices", f"prices must map the tiers {PRICE_TIERS}")
        photo_id = self.network.publish_photo(
            handle, body.get("title", ""), body.get("categories") or [], prices, image)
        return 201, {"photo_id": photo_id}

    def op_buy(self, handle, body: dict) -> tuple[int, dict]:
        if handle.identity.role != Role.CUSTOMER:
            raise ApiError(403, "not-customer", "only customers may buy")
        photo_id = body.get("photo_id", "")
        tier = body.get("tier", "")
        if self.network.reference_peer.get_state("E3", "listing:" + photo_id) is None:
            raise ApiError(404, "unknown-photo", f"no listing for photo: {photo_id}")
        result = self.network.buy(handle, photo_id, tier)
        trade = result["trade"]
        return 200, {"trade_id": trade["trade_id"], "price": trade["price"],
                     "tier": trade["tier"], "seller": trade["seller"],
                     "balance": result["balance"]}

    def op_download(self, handle, photo_id: str) -> bytes:
        return self.network.download(handle, photo_id)

    def op_mint(self, handle, body: dict) -> tuple[int, dict]:
        if handle.identity.role != Role.ADMIN:
            raise ApiError(403, "not-admin", "only admins may mint")
        amount = body.get("amount")
        if not isinstance(amount, int) or isinstance(amount, bool) or amount <= 0:
            raise ApiError(400, "bad-amount", "amount must be a positive integer")
        recipient = body.get("recipient", "")
        balance = self.network.mint(handle, recipient, amount)
        return 200, {"recipient": recipient, "balance": balance}

    def op_wallet(self, handle) -> tuple[int, dict]:
        return 200, {"name": handle.name,
                     "balance": self.network.wallet_balance(handle.name)}

    def op_subscribe(self, handle, body: dict) -> tuple[int, dict]:
        sub = self.network.subscribe(handle, body.get("topic", ""))
        return 201, {"topic": sub.topic, "cursor": sub.cursor}

    def op_poll(self, handle, topic: str, cursor: str | None) -> tuple[int, dict]:
        if not topic:
            raise ApiError(400, "unknown-topic", "topic query parameter required")
        cursor_val = None
        if cursor is not None:
            try:
                cursor_val = int(cursor)
            except ValueError:
                raise ApiError(400, "bad-cursor", "cursor must be an integer")
        events, new_cursor = self.network.poll(handle.name, topic, cursor_val)
        return 200, {
            "events": [
                {"photo_id": e.photo_id, "topic": e.topic, "block": e.block_num,
                 "tx": e.tx_index, "publisher": e.publisher}
                for e in events
            ],
            "cursor": new_cursor,
        }

    def op_health(self) -> tuple[int, dict]:
        leader = self.network.current_leader()
        return 200, {"status": "ok", "tick": self.network.now,
                     "leader": leader.node_id if leader else None,
                     "heights": self.network.heights()}


def _make_handler(gateway: Gateway):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send_json(self, status: int, payload: dict) -> None:
            data = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self._cors()
            self.end_headers()
            self.wfile.write(data)

        def _send_bytes(self, data: bytes, content_type: str) -> None:
            self.send_response(200)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(data)))
            self._cors()
            self.end_headers()
            self.wfile.write(data)

        def _cors(self) -> None:
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Authorization, Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")

        def _body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            if length == 0:
                return {}
            raw = self.rfile.read(length)
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError:
                raise ApiError(400, "bad-json", "request body is not valid JSON")
            if not isinstance(doc, dict):
                raise ApiError(400, "bad-json", "request body must be a JSON object")
            return doc

        def _token(self) -> str | None:
            auth = self.headers.get("Authorization") or ""
            if auth.startswith("Bearer "):
                return auth[len("Bearer "):].strip()
            return None

        def do_OPTIONS(self):
            self.send_response(204)
            self._cors()
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            self._route("GET")

        def do_POST(self):
            self._route("POST")

        def _route(self, method: str) -> None:
            url = urlparse(self.path)
            path = url.path.rstrip("/") or "/"
            query = {k: v[0] for k, v in parse_qs(url.query).items()}
            gw = gateway
            try:
                if method == "GET" and path.startswith("/ui"):
                    self._serve_ui(path)
                    return
                if method == "GET" and path == "/":
                    self.send_response(307)
                    self.send_header("Location", "/ui/")
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                body = self._body() if method == "POST" else {}
                with gw._lock:
                    status_payload = self._dispatch(gw, method, path, query, body)
                if status_payload is None:
                    raise ApiError(404, "not-found", f"no route {method} {path}")
                if isinstance(status_payload, bytes):
                    self._send_bytes(status_payload, "application/octet-stream")
                else:
                    status, payload = status_payload
                    self._send_json(status, payload)
            except Exception as exc:  # every failure leaves as a JSON error
                err = _to_api_error(exc)
                self._send_json(err.status, {"code": err.code, "message": str(err)})

        def _dispatch(self, gw: Gateway, method: str, path: str, query: dict, body: dict):
            if method == "POST" and path == "/register":
                return gw.op_register(body)
            if method == "POST" and path == "/login":
                return gw.op_login(body)
            if method == "POST" and path == "/logout":
                return gw.op_logout(self._token())
            if method == "GET" and path == "/health":
                return gw.op_health()

            handle = gw._handle_auth(self._token())
            if method == "GET" and path == "/photos":
                return gw.op_list_photos(handle, query.get("category", ""))
            if method == "POST" and path == "/photos":
                return gw.op_upload(handle, body)
            if method == "POST" and path == "/buy":
                return gw.op_buy(handle, body)
            if method == "GET" and path.startswith("/download/"):
                return gw.op_download(handle, path[len("/download/"):])
            if method == "POST" and path == "/admin/mint":
                return gw.op_mint(handle, body)
            if method == "GET" and path == "/wallet":
                return gw.op_wallet(handle)
            if method == "POST" and path == "/subscriptions":
                return gw.op_subscribe(handle, body)
            if method == "GET" and path == "/subscriptions/poll":
                return gw.op_poll(handle, query.get("topic", ""), query.get("cursor"))
            return None

        def _serve_ui(self, path: str) -> None:
            ui_dir = gateway.cfg.ui_dir
            if not ui_dir:
                raise ApiError(404, "no-ui", "gateway started without a UI directory")
            rel = path[len("/ui"):].lstrip("/") or "index.html"
            target = (Path(ui_dir) / rel).resolve()
            if not str(target).startswith(str(Path(ui_dir).resolve())) or not target.is_file():
                raise ApiError(404, "not-found", f"no such asset: {rel}")
            types = {".html": "text/html", ".js": "text/javascript", ".css": "text/css",
                     ".map": "application/json", ".svg": "image/svg+xml",
                     ".png": "image/png", ".ico": "image/x-icon"}
            self._send_bytes(target.read_bytes(),
                             types.get(target.suffix, "application/octet-stream"))

    return Handler
