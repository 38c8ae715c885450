/**
 * Typed client for the texton edit service.
 *
 * All texture state lives on the server; this module only moves JSON and
 * PNG bytes. Render URLs carry the revision as a cache-busting tag so
 * overlapping renders never show a stale frame as current.
 */

export interface FrameSize {
  width: number;
  height: number;
}

export interface GaussianRecord {
  delta: number;
  prob: number;
  mean: [number, number];
  cov: [[number, number], [number, number]];
  dir: [number, number];
  feat: number[];
  area: number | null;
}

/** Texton document fields, as serialized by the engine. */
export interface TextonDocument {
  format_version: number;
  frame: FrameSize;
  n_f: number;
  capacity: number;
  gaussians: GaussianRecord[];
}

/** Document plus the session bookkeeping the service appends. */
export interface SessionState extends TextonDocument {
  id: string;
  revision: number;
}

export type EditCommand =
  | { op: "move"; index: number; delta: [number, number] }
  | { op: "scale"; index: number; factor: number }
  | { op: "rotate"; index: number; theta: number }
  | {
      op: "reshuffle";
      permutation?: number[];
      seed?: number;
      gamma?: number;
      mode?: "hard" | "soft";
    }
  | { op: "vary"; delta_f?: number; delta_u?: number }
  | {
      op: "transfer";
      appearance: TextonDocument;
      mode?: "mean" | "replace";
      seed?: number;
    }
  | { op: "interpolate"; target: TextonDocument; eta: number; seed?: number };

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly body: Record<string, unknown>,
  ) {
    super(
      typeof body["error"] === "string"
        ? (body["error"] as string)
        : `service error ${status}`,
    );
    this.name = "ServiceError";
  }
}

/** Optimistic-concurrency rejection; carries the server's revision. */
export class StaleRevisionError extends ServiceError {
  readonly revision: number;

  constructor(status: number, body: Record<string, unknown>) {
    super(status, body);
    this.name = "StaleRevisionError";
    this.revision = typeof body["revision"] === "number" ? body["revision"] : -1;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface CreatePayload {
  document?: TextonDocument;
  synth?: Record<string, unknown>;
}

export class TextonClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchImpl?: FetchLike,
  ) {
    // bind: bare `fetch` loses its receiver when called through a variable
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async json<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "Content-Type": "application/json" };
    }
    const res = await this.fetchImpl(this.baseUrl + path, init);
    const data = (await res.json()) as Record<string, unknown>;
    if (!res.ok) {
      if (res.status === 409 && data["error"] === "stale revision") {
        throw new StaleRevisionError(res.status, data);
      }
      throw new ServiceError(res.status, data);
    }
    return data as T;
  }

  createSession(payload: CreatePayload): Promise<SessionState> {
    return this.json<SessionState>("POST", "/sessions", payload);
  }

  getState(id: string): Promise<SessionState> {
    return this.json<SessionState>("GET", `/sessions/${id}`);
  }

  applyEdit(id: string, command: EditCommand, revision?: number): Promise<SessionState> {
    const body =
      revision === undefined ? command : { ...command, revision };
    return this.json<SessionState>("POST", `/sessions/${id}/edits`, body);
  }

  undo(id: string): Promise<SessionState> {
    return this.json<SessionState>("POST", `/sessions/${id}/undo`);
  }

  renderUrl(id: string, opts: { w?: number; h?: number; revision?: number } = {}): string {
    const q = new URLSearchParams();
    if (opts.w !== undefined) q.set("w", String(opts.w));
    if (opts.h !== undefined) q.set("h", String(opts.h));
    if (opts.revision !== undefined) q.set("rev", String(opts.revision));
    const query = q.toString();
    return `${this.baseUrl}/sessions/${id}/render${query ? "?" + query : ""}`;
  }

  async fetchRender(
    id: string,
    opts: { w?: number; h?: number; revision?: number } = {},
  ): Promise<Uint8Array> {
    const res = await this.fetchImpl(this.renderUrl(id, opts), { method: "GET" });
    if (!res.ok) {
      const data = (await res.json()) as Record<string, unknown>;
      throw new ServiceError(res.status, data);
    }
    return new Uint8Array(await res.arrayBuffer());
  }
}
