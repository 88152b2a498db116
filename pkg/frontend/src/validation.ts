// Client-side form checks. The gateway re-validates everything; these exist
// so a bad submit never leaves the browser.

import { TIERS, type Tier } from "./api.js";

export interface UploadDraft {
  title: string;
  categories: string[];
  prices: Partial<Record<Tier, number>>;
  hasImage: boolean;
}

export function validatePrices(prices: Partial<Record<Tier, number>>): string[] {
  const errors: string[] = [];
  const present = TIERS.filter((tier) => {
    const value = prices[tier];
    return value !== undefined && !Number.isNaN(value);
  });
  if (present.length !== TIERS.length) {
    errors.push(`all three prices are required (${TIERS.join(", ")})`);
  }
  for (const tier of present) {
    const value = prices[tier]!;
    if (!Number.isInteger(value) || value <= 0) {
      errors.push(`${tier} price must be a positive whole number`);
    }
  }
  return errors;
}

export function validateUpload(draft: UploadDraft): string[] {
  const errors: string[] = [];
  if (!draft.title.trim()) errors.push("title is required");
  if (draft.categories.length === 0) errors.push("pick at least one category");
  if (!draft.hasImage) errors.push("choose an image file");
  errors.push(...validatePrices(draft.prices));
  return errors;
}

export function validateMint(recipient: string, amount: number): string[] {
  const errors: string[] = [];
  if (!recipient.trim()) errors.push("recipient is required");
  if (!Number.isInteger(amount) || amount <= 0) {
    errors.push("amount must be a positive whole number");
  }
  return errors;
}
