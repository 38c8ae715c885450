/**
 * Editor store: the single funnel between server payloads and the screen.
 *
 * The store never mutates texture data locally. Every edit goes to the
 * service tagged with the last seen revision; whatever comes back (fresh
 * state on success, the server's current state after a stale-revision
 * conflict) replaces the overlay wholesale. At most one edit is in flight
 * per session; renders may overlap edits because they carry revision tags.
 */

import {
  ServiceError,
  StaleRevisionError,
  type CreatePayload,
  type EditCommand,
  type SessionState,
  type TextonClient,
} from "./api.js";
import { commandForGesture, type Gesture } from "./gizmo.js";
import { nearestTexton, overlayFromState, type OverlayGaussian } from "./overlay.js";

export interface Banner {
  message: string;
}

export interface ReplayPrompt {
  command: EditCommand;
  serverRevision: number;
}

export interface CanvasState {
  session: SessionState | null;
  overlays: OverlayGaussian[];
  selected: number;
  pending: EditCommand | null;
  banner: Banner | null;
  replay: ReplayPrompt | null;
  /** cache-busting tag for render URLs; tracks the revision */
  renderTag: number;
}

export type SubmitResult = "applied" | "skipped" | "busy" | "conflict" | "error";

function message(e: unknown): string {
  return e instanceof Error ? e.message : String(e);
}

export class EditorStore {
  state: CanvasState = {
    session: null,
    overlays: [],
    selected: -1,
    pending: null,
    banner: null,
    replay: null,
    renderTag: 0,
  };

  private listeners: Array<() => void> = [];

  constructor(private readonly client: TextonClient) {}

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const l of this.listeners) l();
  }

  private applyServerState(body: SessionState): void {
    this.state.session = body;
    this.state.overlays = overlayFromState(body);
    this.state.renderTag = body.revision;
    if (this.state.selected >= body.gaussians.length) this.state.selected = -1;
    this.notify();
  }

  async load(spec: CreatePayload): Promise<boolean> {
    try {
      const created = await this.client.createSession(spec);
      // re-read instead of trusting the creation echo: a refresh must
      // reproduce exactly what a later GET reproduces
      const fresh = await this.client.getState(created.id);
      this.state.banner = null;
      this.state.replay = null;
      this.state.selected = -1;
      this.applyServerState(fresh);
      return true;
    } catch (e) {
      this.state.banner = { message: message(e) };
      this.notify();
      return false;
    }
  }

  /** Re-pull server state, discarding anything the client dreamed up. */
  async refresh(): Promise<void> {
    const session = this.state.session;
    if (!session) return;
    try {
      this.applyServerState(await this.client.getState(session.id));
    } catch (e) {
      this.state.banner = { message: message(e) };
      this.notify();
    }
  }

  select(point: [number, number]): number {
    this.state.selected = this.state.session
      ? nearestTexton(this.state.session, point)
      : -1;
    this.notify();
    return this.state.selected;
  }

  async submitGesture(gesture: Gesture): Promise<SubmitResult> {
    const command = commandForGesture(this.state.selected, gesture);
    if (!command) return "skipped";
    return this.submitCommand(command);
  }

  async submitCommand(command: EditCommand): Promise<SubmitResult> {
    const session = this.state.session;
    if (!session) return "error";
    if (this.state.pending) return "busy";
    this.state.pending = command;
    this.notify();
    try {
      const body = await this.client.applyEdit(session.id, command, session.revision);
      this.state.replay = null;
      this.applyServerState(body);
      return "applied";
    } catch (e) {
      if (e instanceof StaleRevisionError) {
        // someone else won the race: show their state, offer a replay
        try {
          this.applyServerState(await this.client.getState(session.id));
        } catch (refetchError) {
          this.state.banner = { message: message(refetchError) };
        }
        this.state.replay = { command, serverRevision: e.revision };
        this.notify();
        return "conflict";
      }
      this.state.banner = { message: message(e) };
      this.notify();
      return "error";
    } finally {
      this.state.pending = null;
      this.notify();
    }
  }

  async confirmReplay(): Promise<SubmitResult> {
    const replay = this.state.replay;
    if (!replay) return "skipped";
    this.state.replay = null;
    return this.submitCommand(replay.command);
  }

  dismissReplay(): void {
    this.state.replay = null;
    this.notify();
  }

  async undo(): Promise<boolean> {
    const session = this.state.session;
    if (!session || this.state.pending) return false;
    try {
      this.applyServerState(await this.client.undo(session.id));
      return true;
    } catch (e) {
      if (e instanceof ServiceError && e.status === 409) {
        this.state.banner = { message: e.message }; // nothing to undo
      } else {
        this.state.banner = { message: message(e) };
      }
      this.notify();
      return false;
    }
  }

  dismissBanner(): void {
    this.state.banner = null;
    this.notify();
  }
}
