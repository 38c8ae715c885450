/**
 * Interpolation scrubbing against a throwaway preview session.
 *
 * Each scrub applies an interpolate edit to the preview session, fetches
 * the render, then undoes, so the session always sits at the source
 * document and eta is always measured from the true endpoints. Requests
 * are rate-limited (trailing edge, latest eta wins), one in flight at a
 * time.
 */

import type { SessionState, TextonClient, TextonDocument } from "./api.js";

export interface ScrubberOptions {
  /** minimum spacing between scrub requests; 100 ms caps at 10/s */
  minIntervalMs?: number;
  now?: () => number;
  schedule?: (fn: () => void, delayMs: number) => void;
  seed?: number;
}

export class InterpolationScrubber {
  readonly disabled: boolean;
  readonly disabledReason: string | null;

  onRender: ((eta: number, png: Uint8Array) => void) | null = null;
  onError: ((err: unknown) => void) | null = null;

  private readonly minIntervalMs: number;
  private readonly now: () => number;
  private readonly schedule: (fn: () => void, delayMs: number) => void;
  private readonly seed: number;

  private session: SessionState | null = null;
  private pendingEta: number | null = null;
  private scheduled = false;
  private inFlight = false;
  private lastRun = Number.NEGATIVE_INFINITY;

  constructor(
    private readonly client: TextonClient,
    private readonly source: TextonDocument,
    private readonly target: TextonDocument,
    opts: ScrubberOptions = {},
  ) {
    this.minIntervalMs = opts.minIntervalMs ?? 100;
    this.now = opts.now ?? (() => Date.now());
    this.schedule = opts.schedule ?? ((fn, ms) => void setTimeout(fn, ms));
    this.seed = opts.seed ?? 0;
    if (source.n_f !== target.n_f) {
      this.disabled = true;
      this.disabledReason = `feature dimensions differ (${source.n_f} vs ${target.n_f})`;
    } else if (
      source.frame.width !== target.frame.width ||
      source.frame.height !== target.frame.height
    ) {
      this.disabled = true;
      this.disabledReason = "frame sizes differ";
    } else {
      this.disabled = false;
      this.disabledReason = null;
    }
  }

  async init(): Promise<void> {
    if (this.disabled || this.session) return;
    this.session = await this.client.createSession({ document: this.source });
  }

  /** Request a preview at eta; collapses bursts to the rate limit. */
  setEta(eta: number): void {
    if (this.disabled) return;
    this.pendingEta = Math.min(1, Math.max(0, eta));
    if (!this.scheduled && !this.inFlight) this.pump();
  }

  private pump(): void {
    if (this.pendingEta === null || this.inFlight) return;
    const wait = this.lastRun + this.minIntervalMs - this.now();
    if (wait > 0) {
      if (!this.scheduled) {
        this.scheduled = true;
        this.schedule(() => {
          this.scheduled = false;
          this.pump();
        }, wait);
      }
      return;
    }
    void this.run();
  }

  private async run(): Promise<void> {
    const session = this.session;
    if (session === null || this.pendingEta === null) return;
    const eta = this.pendingEta;
    this.pendingEta = null;
    this.lastRun = this.now();
    this.inFlight = true;
    try {
      await this.client.applyEdit(session.id, {
        op: "interpolate",
        target: this.target,
        eta,
        seed: this.seed,
      });
      const png = await this.client.fetchRender(session.id);
      await this.client.undo(session.id); // back to the source document
      this.onRender?.(eta, png);
    } catch (e) {
      this.onError?.(e);
    } finally {
      this.inFlight = false;
      if (this.pendingEta !== null) this.pump();
    }
  }
}
