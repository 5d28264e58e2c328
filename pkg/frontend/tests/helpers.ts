import { readFileSync } from "node:fs";
import { expect } from "vitest";
import type { FetchLike } from "../src/api.js";
import { round3 } from "../src/format.js";

export function loadFixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}.json`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf-8")) as T;
}

export interface FetchCall {
  url: string;
  init?: RequestInit;
}

/** Fetch double that records calls and replies with one canned payload. */
export function cannedFetch(
  payload: unknown,
  status = 200,
): { fetch: FetchLike; calls: FetchCall[] } {
  const calls: FetchCall[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    calls.push({ url, init });
    return new Response(JSON.stringify(payload), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetch: fetchImpl, calls };
}

/** The display string is the API value rounded to three decimals; the
 * full value is the API value untouched. */
export function expectDisplayed(
  cell: { display: string; full: number },
  apiValue: number,
): void {
  expect(cell.full).toBe(apiValue);
  expect(cell.display).toBe(round3(apiValue).toFixed(3));
}

/** Signed variant: magnitude rounds half away from zero, sign prefixed. */
export function expectDisplayedSigned(
  cell: { display: string; full: number },
  apiValue: number,
): void {
  expect(cell.full).toBe(apiValue);
  const magnitude = round3(Math.abs(apiValue)).toFixed(3);
  const expected =
    magnitude === "0.000" ? magnitude : apiValue > 0 ? `+${magnitude}` : `-${magnitude}`;
  expect(cell.display).toBe(expected);
}
