// DOM rendering. Views are plain functions from state + handlers to nodes;
// all state changes flow back through the handlers the app wires in.

import { TIERS, type PhotoCard, type Role, type Tier } from "./api.js";
import type { SessionViewState } from "./session.js";

export function el(html: string): HTMLElement {
  const template = document.createElement("template");
  template.innerHTML = html.trim();
  return template.content.firstElementChild as HTMLElement;
}

export function renderTopbar(
  state: SessionViewState | null,
  onNavigate: (route: string) => void,
  onLogout: () => void,
): HTMLElement {
  const bar = el(`<div class="topbar">
    <span class="brand">snapchain market</span>
    <nav></nav>
    <span class="session-info"></span>
  </div>`);
  const nav = bar.querySelector("nav")!;
  const info = bar.querySelector(".session-info")!;
  if (!state) {
    info.textContent = "not signed in";
    return bar;
  }
  const links: Array<[string, string]> = [["#/browse", "Browse"], ["#/wallet", "Wallet"]];
  if (state.role === "photographer") links.push(["#/upload", "Upload"]);
  if (state.role === "admin") links.push(["#/admin", "Mint"]);
  for (const [route, label] of links) {
    const a = el(`<a href="${route}">${label}</a>`);
    a.addEventListener("click", (ev) => {
      ev.preventDefault();
      onNavigate(route);
    });
    nav.appendChild(a);
  }
  info.innerHTML = `<span class="who">${state.name} (${state.role})</span>
    <span class="balance" data-testid="balance">${state.balance} coins</span>`;
  const out = el(`<button class="logout">Sign out</button>`);
  out.addEventListener("click", onLogout);
  info.appendChild(out);
  return bar;
}

export interface LoginHandlers {
  onLogin: (name: string, secret: string) => void;
  onRegister: (name: string, role: Role, secret: string) => void;
}

export function renderLogin(handlers: LoginHandlers): HTMLElement {
  const view = el(`<section class="login-view">
    <h2>Sign in</h2>
    <form class="login-form">
      <input name="name" placeholder="name" autocomplete="username" />
      <input name="secret" type="password" placeholder="secret" />
      <button type="submit">Log in</button>
    </form>
    <h3>or create an account</h3>
    <form class="register-form">
      <input name="name" placeholder="name" />
      <input name="secret" type="password" placeholder="secret" />
      <select name="role">
        <option value="customer">customer</option>
        <option value="photographer">photographer</option>
      </select>
      <button type="submit">Register</button>
    </form>
    <p class="error" data-testid="login-error"></p>
  </section>`);
  view.querySelector(".login-form")!.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const data = new FormData(ev.target as HTMLFormElement);
    handlers.onLogin(String(data.get("name")), String(data.get("secret")));
  });
  view.querySelector(".register-form")!.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const data = new FormData(ev.target as HTMLFormElement);
    handlers.onRegister(
      String(data.get("name")),
      String(data.get("role")) as Role,
      String(data.get("secret")),
    );
  });
  return view;
}

export interface BrowseHandlers {
  onFilter: (category: string) => void;
  onBuy: (photo: PhotoCard, tier: Tier) => void;
  onDownload: (photo: PhotoCard) => void;
  onSubscribe: (topic: string) => void;
}

export function renderBrowse(
  photos: PhotoCard[],
  state: SessionViewState,
  owned: Set<string>,
  handlers: BrowseHandlers,
): HTMLElement {
  const view = el(`<section class="browse-view">
    <div class="browse-controls">
      <input class="category-filter" placeholder="category (empty = all)"
             value="${state.activeCategory}" />
      <button class="apply-filter">Filter</button>
      <button class="follow">Follow this category</button>
    </div>
    <div class="grid" data-testid="photo-grid"></div>
    <p class="empty-state"></p>
  </section>`);
  const filterInput = view.querySelector<HTMLInputElement>(".category-filter")!;
  view.querySelector(".apply-filter")!.addEventListener("click", () =>
    handlers.onFilter(filterInput.value.trim()),
  );
  view.querySelector(".follow")!.addEventListener("click", () => {
    if (filterInput.value.trim()) handlers.onSubscribe(filterInput.value.trim());
  });

  const grid = view.querySelector(".grid")!;
  if (photos.length === 0) {
    view.querySelector(".empty-state")!.textContent = state.activeCategory
      ? `no photos in "${state.activeCategory}" yet`
      : "no photos published yet";
  }
  for (const photo of photos) {
    grid.appendChild(renderCard(photo, state, owned.has(photo.photo_id), handlers));
  }
  return view;
}

function renderCard(
  photo: PhotoCard,
  state: SessionViewState,
  isOwned: boolean,
  handlers: BrowseHandlers,
): HTMLElement {
  const mine = photo.owner === state.name;
  const bio = (photo.owner_profile as { bio?: string }).bio ?? "";
  const card = el(`<div class="card" data-photo="${photo.photo_id}">
    <div class="thumb" title="${photo.photo_id.slice(0, 12)}"></div>
    <h4>${photo.title}</h4>
    <p class="owner">${photo.owner}${bio ? ` &mdash; ${bio}` : ""}</p>
    <p class="categories">${photo.categories.join(", ")}</p>
    <div class="tiers"></div>
    <div class="card-actions"></div>
  </div>`);
  const tiers = card.querySelector(".tiers")!;
  for (const tier of TIERS) {
    const price = photo.prices[tier];
    if (state.role === "customer" && !mine) {
      const btn = el(
        `<button class="buy" data-tier="${tier}">${tier}: ${price}</button>`,
      );
      btn.addEventListener("click", () => handlers.onBuy(photo, tier));
      tiers.appendChild(btn);
    } else {
      tiers.appendChild(el(`<span class="tier">${tier}: ${price}</span>`));
    }
  }
  const actions = card.querySelector(".card-actions")!;
  if (mine || isOwned) {
    const dl = el(`<button class="download">Download original</button>`);
    dl.addEventListener("click", () => handlers.onDownload(photo));
    actions.appendChild(dl);
    if (isOwned) actions.appendChild(el(`<span class="owned-flag">owned</span>`));
  }
  return card;
}

export interface ConfirmHandlers {
  onConfirm: () => void;
  onCancel: () => void;
}

export function renderBuyDialog(
  photo: PhotoCard,
  tier: Tier,
  handlers: ConfirmHandlers,
): HTMLElement {
  const dialog = el(`<div class="overlay" data-testid="buy-dialog">
    <div class="dialog">
      <h3>Buy &ldquo;${photo.title}&rdquo;</h3>
      <p>${tier} license from ${photo.owner} for <b>${photo.prices[tier]}</b> coins</p>
      <button class="confirm">Confirm purchase</button>
      <button class="cancel">Cancel</button>
    </div>
  </div>`);
  dialog.querySelector(".confirm")!.addEventListener("click", handlers.onConfirm);
  dialog.querySelector(".cancel")!.addEventListener("click", handlers.onCancel);
  return dialog;
}

export interface UploadHandlers {
  onSubmit: (
    title: string,
    categories: string[],
    prices: Partial<Record<Tier, number>>,
    file: File | null,
  ) => void;
}

export function renderUpload(handlers: UploadHandlers): HTMLElement {
  const view = el(`<section class="upload-view">
    <h2>Publish a photo</h2>
    <form class="upload-form">
      <input name="title" placeholder="title" />
      <input name="categories" placeholder="categories, comma separated" />
      <input name="file" type="file" accept="image/*" />
      <div class="price-inputs">
        ${TIERS.map(
          (t) => `<label>${t}<input name="price-${t}" type="number" min="1" /></label>`,
        ).join("")}
      </div>
      <button type="submit">Publish</button>
    </form>
    <ul class="errors" data-testid="upload-errors"></ul>
  </section>`);
  view.querySelector(".upload-form")!.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const form = ev.target as HTMLFormElement;
    const data = new FormData(form);
    const prices: Partial<Record<Tier, number>> = {};
    for (const tier of TIERS) {
      const raw = String(data.get(`price-${tier}`) ?? "").trim();
      if (raw !== "") prices[tier] = Number(raw);
    }
    const categories = String(data.get("categories") ?? "")
      .split(",")
      .map((c) => c.trim())
      .filter(Boolean);
    const fileInput = form.querySelector<HTMLInputElement>("input[type=file]")!;
    handlers.onSubmit(
      String(data.get("title") ?? ""),
      categories,
      prices,
      fileInput.files?.[0] ?? null,
    );
  });
  return view;
}

export function renderWallet(
  state: SessionViewState,
  subscriptions: string[],
): HTMLElement {
  return el(`<section class="wallet-view">
    <h2>Wallet</h2>
    <p class="balance-line">Balance: <b data-testid="wallet-balance">${state.balance}</b> coins</p>
    <h3>Followed categories</h3>
    <ul>${subscriptions.map((t) => `<li>${t}</li>`).join("") || "<li>none</li>"}</ul>
  </section>`);
}

export interface MintHandlers {
  onMint: (recipient: string, amount: number) => void;
}

export function renderAdmin(handlers: MintHandlers): HTMLElement {
  const view = el(`<section class="admin-view">
    <h2>Coin administration</h2>
    <form class="mint-form">
      <input name="recipient" placeholder="recipient" />
      <input name="amount" type="number" min="1" placeholder="amount" />
      <button type="submit">Mint</button>
    </form>
    <ul class="errors" data-testid="mint-errors"></ul>
  </section>`);
  view.querySelector(".mint-form")!.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const data = new FormData(ev.target as HTMLFormElement);
    handlers.onMint(String(data.get("recipient") ?? ""), Number(data.get("amount")));
  });
  return view;
}

export function toast(message: string, kind: "info" | "error" = "info"): void {
  const host = document.getElementById("toasts");
  if (!host) return;
  const node = el(`<div class="toast ${kind}">${message}</div>`);
  host.appendChild(node);
  setTimeout(() => node.remove(), 6000);
}
