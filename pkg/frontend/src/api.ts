// Typed client for the marketplace gateway. Every mutation and every piece
// of displayed state goes through these calls; the UI never invents values.

export type Role = "photographer" | "customer" | "admin";
export type Tier = "personal" | "editorial" | "commercial";

export const TIERS: Tier[] = ["personal", "editorial", "commercial"];

export interface PhotoCard {
  photo_id: string;
  owner: string;
  owner_profile: Record<string, unknown>;
  title: string;
  categories: string[];
  prices: Record<Tier, number>;
  published_at: number;
}

export interface LoginResponse {
  token: string;
  name: string;
  role: Role;
  expires_at: number;
  photos: PhotoCard[];
}

export interface BuyResponse {
  trade_id: string;
  price: number;
  tier: Tier;
  seller: string;
  balance: number;
}

export interface PollEvent {
  photo_id: string;
  topic: string;
  block: number;
  tx: number;
  publisher: string;
}

export interface PollResponse {
  events: PollEvent[];
  cursor: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class GatewayClient {
  token: string | null = null;

  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = fetch.bind(globalThis),
  ) {}

  private headers(json = true): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h["Content-Type"] = "application/json";
    if (this.token) h["Authorization"] = `Bearer ${this.token}`;
    return h;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: this.headers(body !== undefined),
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const payload = await res.json();
    if (!res.ok) {
      throw new ApiError(res.status, payload.code ?? "error", payload.message ?? "request failed");
    }
    return payload as T;
  }

  async register(name: string, role: Role, secret: string, profile?: Record<string, unknown>) {
    return this.request<{ name: string; role: Role }>("POST", "/register", {
      name,
      role,
      secret,
      profile,
    });
  }

  async login(name: string, credential: string): Promise<LoginResponse> {
    const res = await this.request<LoginResponse>("POST", "/login", { name, credential });
    this.token = res.token;
    return res;
  }

  async logout(): Promise<void> {
    if (!this.token) return;
    await this.request("POST", "/logout", {});
    this.token = null;
  }

  async listPhotos(category = ""): Promise<PhotoCard[]> {
    const query = category ? `?category=${encodeURIComponent(category)}` : "";
    const res = await this.request<{ photos: PhotoCard[] }>("GET", `/photos${query}`);
    return res.photos;
  }

  async upload(
    title: string,
    categories: string[],
    prices: Record<Tier, number>,
    imageB64: string,
  ): Promise<string> {
    const res = await this.request<{ photo_id: string }>("POST", "/photos", {
      title,
      categories,
      prices,
      image_b64: imageB64,
    });
    return res.photo_id;
  }

  async buy(photoId: string, tier: Tier): Promise<BuyResponse> {
    return this.request<BuyResponse>("POST", "/buy", { photo_id: photoId, tier });
  }

  async download(photoId: string): Promise<Blob> {
    const res = await this.fetchImpl(`${this.baseUrl}/download/${photoId}`, {
      headers: this.headers(false),
    });
    if (!res.ok) {
      const payload = await res.json();
      throw new ApiError(res.status, payload.code ?? "error", payload.message ?? "download failed");
    }
    return res.blob();
  }

  async wallet(): Promise<number> {
    const res = await this.request<{ balance: number }>("GET", "/wallet");
    return res.balance;
  }

  async mint(recipient: string, amount: number): Promise<number> {
    const res = await this.request<{ balance: number }>("POST", "/admin/mint", {
      recipient,
      amount,
    });
    return res.balance;
  }

  async subscribe(topic: string): Promise<number> {
    const res = await this.request<{ cursor: number }>("POST", "/subscriptions", { topic });
    return res.cursor;
  }

  async poll(topic: string, cursor: number): Promise<PollResponse> {
    const params = `topic=${encodeURIComponent(topic)}&cursor=${cursor}`;
    return this.request<PollResponse>("GET", `/subscriptions/poll?${params}`);
  }
}
