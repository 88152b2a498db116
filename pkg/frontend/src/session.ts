// View-level session state. The wallet figure is whatever the last /wallet
// response said; nothing here mutates it locally.

import type { Role } from "./api.js";

export interface SessionViewState {
  token: string;
  name: string;
  role: Role;
  balance: number;
  activeCategory: string;
  cursors: Record<string, number>; // topic -> last seen block
}

const STORAGE_KEY = "snapchain.session";

export function saveSession(state: SessionViewState, storage: Storage = sessionStorage): void {
  storage.setItem(STORAGE_KEY, JSON.stringify(state));
}

export function loadSession(storage: Storage = sessionStorage): SessionViewState | null {
  try {
    const raw = storage.getItem(STORAGE_KEY);
    if (!raw) return null;
    return JSON.parse(raw) as SessionViewState;
  } catch {
    return null;
  }
}

export function clearSession(storage: Storage = sessionStorage): void {
  storage.removeItem(STORAGE_KEY);
}
