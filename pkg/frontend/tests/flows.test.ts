// Browser-level flows against the mocked gateway: the UI climbs through
// login -> filter -> buy -> wallet refresh -> download, and a malformed
// upload never leaves the client.

import { beforeEach, describe, expect, it } from "vitest";

import { App } from "../src/app.js";
import { GatewayClient } from "../src/api.js";
import { MockGateway } from "./mock_gateway.js";

const PRICES = { personal: 10, editorial: 30, commercial: 100 };

function mount(): void {
  document.body.innerHTML =
    '<header id="topbar"></header><main id="app"></main><div id="toasts"></div>';
}

function makeApp(gw: MockGateway): App {
  return new App({
    client: new GatewayClient("", gw.fetch),
    storage: window.sessionStorage,
    pollIntervalMs: 0, // tests drive pollOnce() directly
  });
}

async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

let gw: MockGateway;

beforeEach(() => {
  window.sessionStorage.clear();
  mount();
  gw = new MockGateway();
  gw.accounts.set("alice", { name: "alice", role: "photographer", secret: "pa",
                             profile: { bio: "street" } });
  gw.accounts.set("bob", { name: "bob", role: "customer", secret: "pb", profile: {} });
  gw.seedPhoto("nat-1", "alice", "Forest", ["nature"], PRICES,
               new Uint8Array([1, 2, 3, 4]));
  gw.seedPhoto("sport-1", "alice", "Match", ["sport"], PRICES,
               new Uint8Array([9, 9, 9]));
  gw.wallets.set("bob", 100);
});

function click(selector: string): void {
  const node = document.querySelector<HTMLElement>(selector);
  if (!node) throw new Error(`nothing matches ${selector}`);
  node.dispatchEvent(new MouseEvent("click", { bubbles: true }));
}

function setValue(selector: string, value: string): void {
  const input = document.querySelector<HTMLInputElement>(selector);
  if (!input) throw new Error(`nothing matches ${selector}`);
  input.value = value;
}

async function loginAs(app: App, name: string, secret: string): Promise<void> {
  await app.start();
  setValue(".login-form input[name=name]", name);
  setValue(".login-form input[name=secret]", secret);
  (document.querySelector(".login-form") as HTMLFormElement).dispatchEvent(
    new Event("submit", { bubbles: true, cancelable: true }),
  );
  await flush();
  await flush();
}

describe("customer purchase flow", () => {
  it("login -> filter nature -> buy -> wallet refresh -> download", async () => {
    const app = makeApp(gw);
    await loginAs(app, "bob", "pb");

    // grid rendered from the login snapshot; balance from /wallet
    expect(document.querySelectorAll(".card")).toHaveLength(2);
    expect(document.querySelector("[data-testid=balance]")!.textContent)
      .toContain("100");

    // filter to nature only
    setValue(".category-filter", "nature");
    click(".apply-filter");
    await flush();
    const cards = [...document.querySelectorAll(".card")];
    expect(cards).toHaveLength(1);
    expect(cards[0].getAttribute("data-photo")).toBe("nat-1");

    // buy editorial via the confirm dialog
    click('.card[data-photo="nat-1"] button.buy[data-tier="editorial"]');
    expect(document.querySelector("[data-testid=buy-dialog]")).not.toBeNull();
    click("[data-testid=buy-dialog] .confirm");
    await flush();
    await flush();

    // wallet display reflects the fresh /wallet response, not local math alone
    expect(gw.wallets.get("bob")).toBe(70);
    expect(document.querySelector("[data-testid=balance]")!.textContent)
      .toContain("70");
    const walletCalls = gw.requests.filter(
      (r) => r.method === "GET" && r.path === "/wallet",
    );
    expect(walletCalls.length).toBeGreaterThanOrEqual(2); // login + post-buy refresh

    // the card now offers the download, and the bytes round-trip
    const downloadBtn = document.querySelector(
      '.card[data-photo="nat-1"] button.download',
    );
    expect(downloadBtn).not.toBeNull();
    const blob = await app.client.download("nat-1");
    expect(new Uint8Array(await blob.arrayBuffer())).toEqual(
      new Uint8Array([1, 2, 3, 4]),
    );
  });

  it("underfunded buy shows an error and leaves the wallet untouched", async () => {
    gw.wallets.set("bob", 5);
    const app = makeApp(gw);
    await loginAs(app, "bob", "pb");
    click('.card[data-photo="nat-1"] button.buy[data-tier="personal"]');
    click("[data-testid=buy-dialog] .confirm");
    await flush();
    await flush();
    expect(gw.wallets.get("bob")).toBe(5);
    expect(document.querySelector("[data-testid=balance]")!.textContent)
      .toContain("5");
    const toasts = [...document.querySelectorAll(".toast.error")];
    expect(toasts.some((t) => t.textContent!.includes("not enough coins"))).toBe(true);
  });

  it("bad credentials stay on the login view with an inline error", async () => {
    const app = makeApp(gw);
    await loginAs(app, "bob", "wrong");
    expect(app.state).toBeNull();
    expect(document.querySelector("[data-testid=login-error]")!.textContent)
      .not.toBe("");
  });

  it("an expired token drops the session back to the login view", async () => {
    const app = makeApp(gw);
    await loginAs(app, "bob", "pb");
    expect(app.state).not.toBeNull();
    gw.tokens.clear(); // server-side expiry
    await app.refreshWallet();
    expect(app.state).toBeNull();
    expect(document.querySelector(".login-form")).not.toBeNull();
    expect(window.sessionStorage.getItem("snapchain.session")).toBeNull();
  });
});

describe("photographer upload flow", () => {
  it("blocks an upload with fewer than three prices client-side", async () => {
    const app = makeApp(gw);
    await loginAs(app, "alice", "pa");
    app.navigate("#/upload");

    const before = gw.requests.length;
    setValue(".upload-form input[name=title]", "Two priced");
    setValue(".upload-form input[name=categories]", "nature");
    setValue(".upload-form input[name=price-personal]", "10");
    setValue(".upload-form input[name=price-editorial]", "30");
    // commercial left empty; attach a file so only the price rule can fail
    const fileInput = document.querySelector<HTMLInputElement>(
      ".upload-form input[type=file]",
    )!;
    const file = new File([new Uint8Array([1, 2, 3])], "x.png", { type: "image/png" });
    Object.defineProperty(fileInput, "files", { value: [file] });

    (document.querySelector(".upload-form") as HTMLFormElement).dispatchEvent(
      new Event("submit", { bubbles: true, cancelable: true }),
    );
    await flush();

    const errors = document.querySelector("[data-testid=upload-errors]")!;
    expect(errors.textContent).toContain("all three prices are required");
    expect(gw.requests.length).toBe(before); // nothing left the browser
    expect(gw.photos.size).toBe(2);
  });

  it("a complete upload reaches the gateway and lands in the grid", async () => {
    const app = makeApp(gw);
    await loginAs(app, "alice", "pa");
    app.navigate("#/upload");

    setValue(".upload-form input[name=title]", "Fresh");
    setValue(".upload-form input[name=categories]", "nature, animal");
    setValue(".upload-form input[name=price-personal]", "10");
    setValue(".upload-form input[name=price-editorial]", "30");
    setValue(".upload-form input[name=price-commercial]", "100");
    const fileInput = document.querySelector<HTMLInputElement>(
      ".upload-form input[type=file]",
    )!;
    const file = new File([new Uint8Array([5, 5, 5])], "f.png", { type: "image/png" });
    Object.defineProperty(fileInput, "files", { value: [file] });

    (document.querySelector(".upload-form") as HTMLFormElement).dispatchEvent(
      new Event("submit", { bubbles: true, cancelable: true }),
    );
    await new Promise((resolve) => setTimeout(resolve, 20)); // FileReader roundtrip

    expect(gw.photos.size).toBe(3);
    const fresh = [...gw.photos.values()].find((p) => p.title === "Fresh")!;
    expect(new Uint8Array(fresh.bytes)).toEqual(new Uint8Array([5, 5, 5]));
  });

  it("photographers see no buy buttons and no mint view", async () => {
    const app = makeApp(gw);
    await loginAs(app, "alice", "pa");
    expect(document.querySelector("button.buy")).toBeNull();
    expect([...document.querySelectorAll(".topbar a")].map((a) => a.textContent))
      .not.toContain("Mint");
    app.navigate("#/admin");
    expect(document.querySelector(".forbidden")).not.toBeNull();
  });
})

describe("admin and subscriptions", () => {
  it("admin mints and sees the recipient balance", async () => {
    const app = makeApp(gw);
    await loginAs(app, "admin", "admin-secret");
    app.navigate("#/admin");
    setValue(".mint-form input[name=recipient]", "bob");
    setValue(".mint-form input[name=amount]", "40");
    (document.querySelector(".mint-form") as HTMLFormElement).dispatchEvent(
      new Event("submit", { bubbles: true, cancelable: true }),
    );
    await flush();
    expect(gw.wallets.get("bob")).toBe(140);
    const toasts = [...document.querySelectorAll(".toast")];
    expect(toasts.some((t) => t.textContent!.includes("balance now 140"))).toBe(true);
  });

  it("subscription polling surfaces newly published photos", async () => {
    const app = makeApp(gw);
    await loginAs(app, "bob", "pb");
    setValue(".category-filter", "nature");
    click(".follow");
    await flush();

    expect(await app.pollOnce()).toBeUndefined();
    expect(document.querySelectorAll(".toast").length).toBe(1); // just "following"

    gw.seedPhoto("nat-2", "alice", "New Forest", ["nature"], PRICES,
                 new Uint8Array([8]));
    await app.pollOnce();
    await flush();
    const toasts = [...document.querySelectorAll(".toast")];
    expect(toasts.some((t) => t.textContent!.includes('new photo(s) in "nature"')))
      .toBe(true);
    // cursor advanced: a second poll is quiet
    const count = document.querySelectorAll(".toast").length;
    await app.pollOnce();
    expect(document.querySelectorAll(".toast").length).toBe(count);
  });
});
