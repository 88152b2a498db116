// Application shell: routing, session lifecycle, and the glue between the
// gateway client and the views. Nothing below holds money or ownership state
// of its own; a failed request leaves the display on the last server truth.

import { ApiError, GatewayClient, type PhotoCard, type Role, type Tier } from "./api.js";
import {
  clearSession,
  loadSession,
  saveSession,
  type SessionViewState,
} from "./session.js";
import { validateMint, validateUpload } from "./validation.js";
import {
  renderAdmin,
  renderBrowse,
  renderBuyDialog,
  renderLogin,
  renderTopbar,
  renderUpload,
  renderWallet,
  toast,
} from "./views.js";

export interface AppOptions {
  client?: GatewayClient;
  storage?: Storage;
  pollIntervalMs?: number; // 0 disables the timer (tests call pollOnce)
}

export class App {
  readonly client: GatewayClient;
  state: SessionViewState | null = null;
  route = "#/login";
  photos: PhotoCard[] = [];
  owned = new Set<string>();
  private readonly storage: Storage;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private readonly pollIntervalMs: number;

  constructor(opts: AppOptions = {}) {
    this.client = opts.client ?? new GatewayClient("");
    this.storage = opts.storage ?? sessionStorage;
    this.pollIntervalMs = opts.pollIntervalMs ?? 5000;
  }

  async start(): Promise<void> {
    const saved = loadSession(this.storage);
    if (saved) {
      this.client.token = saved.token;
      try {
        saved.balance = await this.client.wallet();
        this.state = saved;
        this.route = "#/browse";
        await this.refreshPhotos();
      } catch {
        clearSession(this.storage);
        this.client.token = null;
      }
    }
    this.startPolling();
    this.render();
  }

  private startPolling(): void {
    if (this.pollIntervalMs > 0 && this.pollTimer === null) {
      this.pollTimer = setInterval(() => {
        void this.pollOnce();
      }, this.pollIntervalMs);
    }
  }

  stop(): void {
    if (this.pollTimer !== null) clearInterval(this.pollTimer);
    this.pollTimer = null;
  }

  // Routing and rendering

  navigate(route: string): void {
    this.route = route;
    this.render();
  }

  render(): void {
    const top = document.getElementById("topbar")!;
    const main = document.getElementById("app")!;
    top.replaceChildren(
      renderTopbar(this.state, (r) => this.navigate(r), () => void this.logout()),
    );
    main.replaceChildren(this.currentView());
  }

  private currentView(): HTMLElement {
    if (!this.state) {
      return renderLogin({
        onLogin: (name, secret) => void this.login(name, secret),
        onRegister: (name, role, secret) => void this.register(name, role, secret),
      });
    }
    switch (this.route) {
      case "#/upload":
        if (this.state.role !== "photographer") return this.forbidden();
        return renderUpload({ onSubmit: (...args) => void this.upload(...args) });
      case "#/admin":
        if (this.state.role !== "admin") return this.forbidden();
        return renderAdmin({ onMint: (to, amount) => void this.mint(to, amount) });
      case "#/wallet":
        return renderWallet(this.state, Object.keys(this.state.cursors));
      default:
        return renderBrowse(this.photos, this.state, this.owned, {
          onFilter: (category) => void this.filter(category),
          onBuy: (photo, tier) => this.confirmBuy(photo, tier),
          onDownload: (photo) => void this.download(photo),
          onSubscribe: (topic) => void this.subscribe(topic),
        });
    }
  }

  private forbidden(): HTMLElement {
    const div = document.createElement("p");
    div.className = "forbidden";
    div.textContent = "this view is not available for your role";
    return div;
  }

  private loginError(message: string): void {
    this.render();
    const box = document.querySelector<HTMLElement>("[data-testid=login-error]");
    if (box) box.textContent = message;
  }

  // Session

  async login(name: string, secret: string): Promise<void> {
    try {
      const res = await this.client.login(name, secret);
      this.state = {
        token: res.token,
        name: res.name,
        role: res.role,
        balance: 0,
        activeCategory: "",
        cursors: {},
      };
      this.photos = res.photos;
      this.state.balance = await this.client.wallet();
      saveSession(this.state, this.storage);
      this.route = "#/browse";
      this.render();
    } catch (err) {
      this.loginError(err instanceof ApiError ? err.message : "login failed");
    }
  }

  async register(name: string, role: Role, secret: string): Promise<void> {
    try {
      await this.client.register(name, role, secret);
      await this.login(name, secret);
    } catch (err) {
      this.loginError(err instanceof ApiError ? err.message : "registration failed");
    }
  }

  async logout(): Promise<void> {
    try {
      await this.client.logout();
    } catch {
      // token may already be dead; local teardown proceeds either way
    }
    this.state = null;
    this.photos = [];
    this.owned.clear();
    clearSession(this.storage);
    this.route = "#/login";
    this.render();
  }

  private async expire(): Promise<void> {
    this.state = null;
    clearSession(this.storage);
    this.client.token = null;
    this.route = "#/login";
    this.render();
    toast("session expired, sign in again", "error");
  }

  private async guarded<T>(call: () => Promise<T>): Promise<T | undefined> {
    try {
      return await call();
    } catch (err) {
      if (err instanceof ApiError && err.status === 401) {
        await this.expire();
        return undefined;
      }
      throw err;
    }
  }

  // Browse / buy / download

  async refreshPhotos(): Promise<void> {
    if (!this.state) return;
    const photos = await this.guarded(() =>
      this.client.listPhotos(this.state!.activeCategory),
    );
    if (photos) this.photos = photos;
  }

  async filter(category: string): Promise<void> {
    if (!this.state) return;
    this.state.activeCategory = category;
    saveSession(this.state, this.storage);
    await this.refreshPhotos();
    this.render();
  }

  confirmBuy(photo: PhotoCard, tier: Tier): void {
    const dialog = renderBuyDialog(photo, tier, {
      onConfirm: () => {
        dialog.remove();
        void this.buy(photo, tier);
      },
      onCancel: () => dialog.remove(),
    });
    document.body.appendChild(dialog);
  }

  async buy(photo: PhotoCard, tier: Tier): Promise<void> {
    if (!this.state) return;
    try {
      const res = await this.guarded(() => this.client.buy(photo.photo_id, tier));
      if (!res) return;
      this.owned.add(photo.photo_id);
      toast(`bought ${photo.title} (${tier}) — trade ${res.trade_id.slice(0, 10)}`);
      await this.refreshWallet();
      this.render();
    } catch (err) {
      if (err instanceof ApiError && err.code === "insufficient-funds") {
        toast(`not enough coins: ${err.message}`, "error");
      } else if (err instanceof ApiError && err.code === "mvcc-conflict") {
        toast("purchase lost a concurrent race — try again", "error");
      } else {
        toast(err instanceof Error ? err.message : "purchase failed", "error");
      }
    }
  }

  async refreshWallet(): Promise<void> {
    if (!this.state) return;
    const balance = await this.guarded(() => this.client.wallet());
    if (balance !== undefined) {
      this.state.balance = balance;
      saveSession(this.state, this.storage);
    }
  }

  async download(photo: PhotoCard): Promise<void> {
    try {
      const blob = await this.guarded(() => this.client.download(photo.photo_id));
      if (!blob) return;
      const url = URL.createObjectURL(blob);
      const a = document.createElement("a");
      a.href = url;
      a.download = `${photo.title || photo.photo_id.slice(0, 12)}.img`;
      document.body.appendChild(a);
      a.click();
      a.remove();
      URL.revokeObjectURL(url);
    } catch (err) {
      toast(err instanceof Error ? err.message : "download failed", "error");
    }
  }

  // Publishing

  async upload(
    title: string,
    categories: string[],
    prices: Partial<Record<Tier, number>>,
    file: File | null,
  ): Promise<void> {
    const errors = validateUpload({ title, categories, prices, hasImage: file !== null });
    const box = document.querySelector<HTMLElement>("[data-testid=upload-errors]");
    if (errors.length > 0) {
      if (box) box.innerHTML = errors.map((e) => `<li>${e}</li>`).join("");
      return; // nothing leaves the browser on a bad form
    }
    if (box) box.innerHTML = "";
    try {
      const imageB64 = await fileToBase64(file!);
      const photoId = await this.guarded(() =>
        this.client.upload(title, categories, prices as Record<Tier, number>, imageB64),
      );
      if (!photoId) return;
      toast(`published ${title} as ${photoId.slice(0, 12)}`);
      await this.refreshPhotos();
      this.navigate("#/browse");
    } catch (err) {
      if (box && err instanceof ApiError) {
        box.innerHTML = `<li>${err.code}: ${err.message}</li>`;
      }
    }
  }

  // Admin

  async mint(recipient: string, amount: number): Promise<void> {
    const errors = validateMint(recipient, amount);
    const box = document.querySelector<HTMLElement>("[data-testid=mint-errors]");
    if (errors.length > 0) {
      if (box) box.innerHTML = errors.map((e) => `<li>${e}</li>`).join("");
      return;
    }
    try {
      const balance = await this.guarded(() => this.client.mint(recipient, amount));
      if (balance === undefined) return;
      if (box) box.innerHTML = "";
      toast(`minted ${amount} to ${recipient}; balance now ${balance}`);
    } catch (err) {
      if (box && err instanceof ApiError) {
        box.innerHTML = `<li>${err.code}: ${err.message}</li>`;
      }
    }
  }

  // Subscriptions

  async subscribe(topic: string): Promise<void> {
    if (!this.state) return;
    const cursor = await this.guarded(() => this.client.subscribe(topic));
    if (cursor === undefined) return;
    if (!(topic in this.state.cursors)) this.state.cursors[topic] = cursor;
    saveSession(this.state, this.storage);
    toast(`following "${topic}"`);
  }

  async pollOnce(): Promise<void> {
    if (!this.state) return;
    let fresh = 0;
    for (const topic of Object.keys(this.state.cursors)) {
      const res = await this.guarded(() =>
        this.client.poll(topic, this.state!.cursors[topic]),
      );
      if (!res) return;
      if (res.events.length > 0) {
        fresh += res.events.length;
        toast(`${res.events.length} new photo(s) in "${topic}"`);
      }
      this.state.cursors[topic] = res.cursor;
    }
    if (fresh > 0) {
      saveSession(this.state, this.storage);
      await this.refreshPhotos();
      if (this.route === "#/browse") this.render();
    }
  }
}

function fileToBase64(file: File): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onerror = () => reject(reader.error);
    reader.onload = () => {
      const url = String(reader.result);
      resolve(url.slice(url.indexOf(",") + 1)); // strip the data: prefix
    };
    reader.readAsDataURL(file);
  });
}

export function main(): void {
  const app = new App();
  void app.start();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  main();
}
