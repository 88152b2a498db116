#!/usr/bin/env python3
"""Run the marketplace demo end to end and print each step.

Simulation mode by default; --http drives the same flow through a live
gateway on an ephemeral port instead.
"""

import argparse
import base64
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from snapchain import Network, NetworkConfig, Role
from snapchain.gateway import Gateway, GatewayConfig

IMAGE = b"\x89PNG\r\n\x1a\n" + b"alpine-morning-demo" * 8
PRICES = {"personal": 10, "editorial": 30, "commercial": 100}


def run_sim(seed: int) -> None:
    net = Network(NetworkConfig(seed=seed))
    net.up()
    print(f"network up at tick {net.now}, leader {net.current_leader().node_id}")

    alice = net.register_client("alice", Role.PHOTOGRAPHER, "alice-pw")
    bob = net.register_client("bob", Role.CUSTOMER, "bob-pw")
    print("registered alice (photographer) and bob (customer)")

    print("mint 100 ->", net.mint(net.admin_handle, "bob", 100))
    net.subscribe(bob, "nature")
    photo_id = net.publish_photo(alice, "Alpine Morning", ["nature", "animal"],
                                 PRICES, IMAGE)
    print("published", photo_id[:16], "in nature+animal")

    events, cursor = net.poll("bob", "nature")
    print(f"bob polls nature -> {len(events)} event(s), cursor {cursor}")

    result = net.buy(bob, photo_id, "editorial")
    print("bob buys editorial for", result["trade"]["price"],
          "-> balance", result["balance"])
    print("alice balance:", net.wallet_balance("alice"))

    data = net.download(bob, photo_id)
    print("download intact:", data == IMAGE)

    print("\nchain summaries (E3):")
    for line in net.reference_peer.ledgers["E3"].block_summaries():
        print(" ", line)
    print("state digest:", net.state_digest()[:24])


def run_http(seed: int) -> None:
    import httpx

    net = Network(NetworkConfig(seed=seed))
    net.up()
    gw = Gateway(net, GatewayConfig())
    gw.start()
    print("gateway at", gw.base_url)
    c = httpx.Client(base_url=gw.base_url, timeout=60)
    try:
        for name, role, pw in (("alice", "photographer", "alice-pw"),
                               ("bob", "customer", "bob-pw")):
            c.post("/register", json={"name": name, "role": role, "secret": pw})
        admin = c.post("/login", json={"name": "admin",
                                       "credential": "admin-secret"}).json()["token"]
        alice = c.post("/login", json={"name": "alice",
                                       "credential": "alice-pw"}).json()["token"]
        bob = c.post("/login", json={"name": "bob",
                                     "credential": "bob-pw"}).json()["token"]
        print("mint:", c.post("/admin/mint",
                              json={"recipient": "bob", "amount": 100},
                              headers={"Authorization": f"Bearer {admin}"}).json())
        r = c.post("/photos", json={
            "title": "Alpine Morning", "categories": ["nature", "animal"],
            "prices": PRICES, "image_b64": base64.b64encode(IMAGE).decode()},
            headers={"Authorization": f"Bearer {alice}"})
        photo_id = r.json()["photo_id"]
        print("published:", photo_id[:16])
        c.post("/subscriptions", json={"topic": "nature"},
               headers={"Authorization": f"Bearer {bob}"})
        print("buy:", c.post("/buy", json={"photo_id": photo_id, "tier": "editorial"},
                             headers={"Authorization": f"Bearer {bob}"}).json())
        poll = c.get("/subscriptions/poll", params={"topic": "nature", "cursor": 0},
                     headers={"Authorization": f"Bearer {bob}"}).json()
        print("poll:", poll)
        data = c.get(f"/download/{photo_id}",
                     headers={"Authorization": f"Bearer {bob}"}).content
        print("download intact:", data == IMAGE)
        for name, tok in (("bob", bob), ("alice", alice)):
            print(name, "wallet:",
                  c.get("/wallet", headers={"Authorization": f"Bearer {tok}"}).json())
    finally:
        gw.stop()


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--http", action="store_true",
                        help="drive the flow through a live HTTP gateway")
    args = parser.parse_args()
    if args.http:
        run_http(args.seed)
    else:
        run_sim(args.seed)
