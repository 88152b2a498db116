import base64
import threading
import time

import httpx
import pytest

from snapchain import Network, NetworkConfig, Role
from snapchain.gateway import Gateway, GatewayConfig

PRICES = {"personal": 10, "editorial": 30, "commercial": 100}
IMG = b"\x89PNG\r\n\x1a\n" + b"gateway-test-image" * 4


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode()


@pytest.fixture(scope="module")
def service():
    net = Network(NetworkConfig(seed=201, endorser_count=3, session_ttl=60.0))
    net.up()
    gw = Gateway(net, GatewayConfig())
    gw.start()
    client = httpx.Client(base_url=gw.base_url, timeout=60)
    yield net, gw, client
    client.close()
    gw.stop()


@pytest.fixture(scope="module")
def tokens(service):
    _, _, c = service
    assert c.post("/register", json={"name": "alice", "role": "photographer",
                                     "secret": "pa",
                                     "profile": {"bio": "street"}}).status_code == 201
    assert c.post("/register", json={"name": "bob", "role": "customer",
                                     "secret": "pb"}).status_code == 201
    alice = c.post("/login", json={"name": "alice", "credential": "pa"}).json()["token"]
    bob = c.post("/login", json={"name": "bob", "credential": "pb"}).json()["token"]
    admin = c.post("/login", json={"name": "admin",
                                   "credential": "admin-secret"}).json()["token"]
    return {"alice": {"Authorization": f"Bearer {alice}"},
            "bob": {"Authorization": f"Bearer {bob}"},
            "admin": {"Authorization": f"Bearer {admin}"}}


def test_register_rejects_admin_and_duplicates(service):
    _, _, c = service
    r = c.post("/register", json={"name": "eve", "role": "admin", "secret": "x"})
    assert r.status_code == 400
    c.post("/register", json={"name": "dupe", "role": "customer", "secret": "x"})
    r = c.post("/register", json={"name": "dupe", "role": "customer", "secret": "x"})
    assert r.status_code == 409
    assert r.json()["code"] == "duplicate-name"


def test_login_returns_photo_snapshot_and_errors(service, tokens):
    _, _, c = service
    r = c.post("/login", json={"name": "bob", "credential": "pb"})
    assert r.status_code == 200
    body = r.json()
    assert "photos" in body and isinstance(body["photos"], list)
    assert body["role"] == "customer"

    assert c.post("/login", json={"name": "bob", "credential": "wrong"}).status_code == 401
    assert c.post("/login", json={"name": "ghost", "credential": "x"}).status_code == 404


def test_upload_buy_download_flow(service, tokens):
    net, _, c = service
    r = c.post("/admin/mint", json={"recipient": "bob", "amount": 100},
               headers=tokens["admin"])
    assert r.status_code == 200 and r.json()["balance"] == 100

    r = c.post("/photos", json={"title": "Alley", "categories": ["human"],
                                "prices": PRICES, "image_b64": b64(IMG)},
               headers=tokens["alice"])
    assert r.status_code == 201
    photo_id = r.json()["photo_id"]

    r = c.get("/photos", params={"category": "human"}, headers=tokens["bob"])
    cards = r.json()["photos"]
    assert [p["photo_id"] for p in cards] == [photo_id]
    assert cards[0]["owner_profile"] == {"bio": "street"}
    assert cards[0]["prices"] == PRICES

    # no grant yet
    assert c.get(f"/download/{photo_id}", headers=tokens["bob"]).status_code == 403

    r = c.post("/buy", json={"photo_id": photo_id, "tier": "editorial"},
               headers=tokens["bob"])
    assert r.status_code == 200
    assert r.json()["balance"] == 70
    assert r.json()["seller"] == "alice"

    assert c.get("/wallet", headers=tokens["bob"]).json()["balance"] == 70

    r = c.get(f"/download/{photo_id}", headers=tokens["bob"])
    assert r.status_code == 200 and r.content == IMG
    # owner download works without a grant
    r = c.get(f"/download/{photo_id}", headers=tokens["alice"])
    assert r.status_code == 200 and r.content == IMG


def test_upload_rejections(service, tokens):
    _, _, c = service
    # customers may not upload
    r = c.post("/photos", json={"title": "X", "categories": ["human"],
                                "prices": PRICES, "image_b64": b64(IMG)},
               headers=tokens["bob"])
    assert r.status_code == 403
    # wrong price count
    r = c.post("/photos", json={"title": "X", "categories": ["human"],
                                "prices": {"personal": 5}, "image_b64": b64(IMG)},
               headers=tokens["alice"])
    assert r.status_code == 400 and r.json()["code"] == "bad-prices"
    # no categories
    r = c.post("/photos", json={"title": "X", "categories": [],
                                "prices": PRICES, "image_b64": b64(IMG)},
               headers=tokens["alice"])
    assert r.status_code == 400 and r.json()["code"] == "no-category"
    # not an image
    r = c.post("/photos", json={"title": "X", "categories": ["human"],
                                "prices": PRICES, "image_b64": b64(b"plain text")},
               headers=tokens["alice"])
    assert r.status_code == 400 and r.json()["code"] == "bad-image"
    # same bytes twice: content-addressed id collides
    r = c.post("/photos", json={"title": "Again", "categories": ["human"],
                                "prices": PRICES, "image_b64": b64(IMG)},
               headers=tokens["alice"])
    assert r.status_code == 409 and r.json()["code"] == "photo-exists"


def test_buy_error_codes(service, tokens):
    _, _, c = service
    r = c.post("/buy", json={"photo_id": "no-such", "tier": "personal"},
               headers=tokens["bob"])
    assert r.status_code == 404
    image = b"\x89PNG\r\n\x1a\n" + b"pricey"
    r = c.post("/photos", json={"title": "Pricey", "categories": ["sport"],
                                "prices": {"personal": 10**6, "editorial": 2 * 10**6,
                                           "commercial": 3 * 10**6},
                                "image_b64": b64(image)}, headers=tokens["alice"])
    pid = r.json()["photo_id"]
    r = c.post("/buy", json={"photo_id": pid, "tier": "personal"},
               headers=tokens["bob"])
    assert r.status_code == 402 and r.json()["code"] == "insufficient-funds"
    # photographers may not buy
    r = c.post("/buy", json={"photo_id": pid, "tier": "personal"},
               headers=tokens["alice"])
    assert r.status_code == 403


def test_mint_requires_admin_and_positive_amount(service, tokens):
    _, _, c = service
    r = c.post("/admin/mint", json={"recipient": "bob", "amount": 10},
               headers=tokens["alice"])
    assert r.status_code == 403
    r = c.post("/admin/mint", json={"recipient": "bob", "amount": 0},
               headers=tokens["admin"])
    assert r.status_code == 400
    r = c.post("/admin/mint", json={"recipient": "nobody", "amount": 10},
               headers=tokens["admin"])
    assert r.status_code == 404


def test_subscription_poll_endpoint(service, tokens):
    _, _, c = service
    r = c.post("/subscriptions", json={"topic": "sky"}, headers=tokens["bob"])
    assert r.status_code == 201
    cursor = r.json()["cursor"]
    r = c.get("/subscriptions/poll", params={"topic": "sky", "cursor": cursor},
              headers=tokens["bob"])
    assert r.status_code == 200 and r.json()["events"] == []

    image = b"\x89PNG\r\n\x1a\n" + b"sky"
    c.post("/photos", json={"title": "Sky", "categories": ["sky"],
                            "prices": PRICES, "image_b64": b64(image)},
           headers=tokens["alice"])
    r = c.get("/subscriptions/poll", params={"topic": "sky", "cursor": cursor},
              headers=tokens["bob"])
    events = r.json()["events"]
    assert len(events) == 1 and events[0]["publisher"] == "alice"
    # polling again from the returned cursor is empty: exactly once
    r2 = c.get("/subscriptions/poll",
               params={"topic": "sky", "cursor": r.json()["cursor"]},
               headers=tokens["bob"])
    assert r2.json()["events"] == []


def test_missing_and_revoked_tokens(service, tokens):
    _, _, c = service
    assert c.get("/wallet").status_code == 401
    assert c.get("/wallet", headers={"Authorization": "Bearer junk"}).status_code == 401
    tok = c.post("/login", json={"name": "bob", "credential": "pb"}).json()["token"]
    headers = {"Authorization": f"Bearer {tok}"}
    assert c.get("/wallet", headers=headers).status_code == 200
    assert c.post("/logout", headers=headers).status_code == 200
    assert c.get("/wallet", headers=headers).status_code == 401


def test_token_expiry_rejected():
    net = Network(NetworkConfig(seed=202, endorser_count=3, session_ttl=0.2))
    net.up()
    net.register_client("x", Role.CUSTOMER, "px")
    gw = Gateway(net, GatewayConfig())
    gw.start()
    try:
        c = httpx.Client(base_url=gw.base_url, timeout=30)
        tok = c.post("/login", json={"name": "x", "credential": "px"}).json()["token"]
        headers = {"Authorization": f"Bearer {tok}"}
        assert c.get("/wallet", headers=headers).status_code == 200
        time.sleep(0.25)
        assert c.get("/wallet", headers=headers).status_code == 401
    finally:
        gw.stop()


def test_concurrent_double_spend_one_200_one_409():
    net = Network(NetworkConfig(seed=203, endorser_count=3))
    net.up()
    alice = net.register_client("seller", Role.PHOTOGRAPHER, "ps")
    net.register_client("buyer", Role.CUSTOMER, "pc")
    net.mint(net.admin_handle, "buyer", 40)
    pid = net.publish_photo(alice, "Contested", ["nature"],
                            {"personal": 30, "editorial": 50, "commercial": 70}, IMG)

    gw = Gateway(net, GatewayConfig(pump_sleep=0.001))
    gw.start()
    try:
        c0 = httpx.Client(base_url=gw.base_url, timeout=120)
        tok = c0.post("/login", json={"name": "buyer", "credential": "pc"}).json()["token"]
        headers = {"Authorization": f"Bearer {tok}"}

        outcomes = [None, None]
        barrier = threading.Barrier(2)

        def buy(slot):
            client = httpx.Client(base_url=gw.base_url, timeout=120)
            barrier.wait()
            r = client.post("/buy", json={"photo_id": pid, "tier": "personal"},
                            headers=headers)
            outcomes[slot] = (r.status_code, r.json().get("code"))
            client.close()

        threads = [threading.Thread(target=buy, args=(i,)) for i in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        assert sorted(o[0] for o in outcomes) == [200, 409], outcomes
        loser = next(o for o in outcomes if o[0] == 409)
        assert loser[1] == "mvcc-conflict"
        assert c0.get("/wallet", headers=headers).json()["balance"] == 10
    finally:
        gw.stop()


def test_health_endpoint(service):
    _, _, c = service
    body = c.get("/health").json()
    assert body["status"] == "ok"
    assert body["leader"] is not None
    assert set(body["heights"]) == {"E1", "E2", "E3", "E4"}
