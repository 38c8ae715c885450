/** Scripted fetch for unit tests, plus document builders. */

import type { FetchLike, GaussianRecord, SessionState, TextonDocument } from "../src/api.js";

export interface RecordedCall {
  method: string;
  url: string;
  body: unknown;
}

export interface Scripted {
  fetch: FetchLike;
  calls: RecordedCall[];
}

export type Step =
  | { json: unknown; status?: number }
  | { bytes: Uint8Array; status?: number };

/** Replies with the queued steps in order; records every call. */
export function scriptedFetch(steps: Step[]): Scripted {
  const calls: RecordedCall[] = [];
  let cursor = 0;
  const impl: FetchLike = async (url, init) => {
    calls.push({
      method: init?.method ?? "GET",
      url,
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    });
    const step = steps[cursor++];
    if (!step) throw new Error(`unscripted request #${cursor}: ${url}`);
    if ("bytes" in step) {
      return new Response(step.bytes.slice(), {
        status: step.status ?? 200,
        headers: { "Content-Type": "image/png" },
      });
    }
    return new Response(JSON.stringify(step.json), {
      status: step.status ?? 200,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetch: impl, calls };
}

export function gaussian(partial: Partial<GaussianRecord> = {}): GaussianRecord {
  return {
    delta: 1.0,
    prob: 1.0,
    mean: [10, 10],
    cov: [
      [4, 0],
      [0, 1],
    ],
    dir: [1, 0],
    feat: [1, 0, 0],
    area: 8,
    ...partial,
  };
}

export function document(
  gaussians: GaussianRecord[],
  partial: Partial<TextonDocument> = {},
): TextonDocument {
  return {
    format_version: 1,
    frame: { width: 48, height: 48 },
    n_f: 3,
    capacity: Math.max(gaussians.length, 1),
    gaussians,
    ...partial,
  };
}

export function session(
  gaussians: GaussianRecord[],
  revision = 0,
  id = "abc123",
): SessionState {
  return { ...document(gaussians), id, revision };
}
