/**
 * DOM wiring: one canvas, a gizmo mode selector, undo, an eta slider, and
 * the error banner. All texture math happens server-side; this file only
 * routes events into the store and repaints from its state.
 */

import { TextonClient, type TextonDocument } from "./api.js";
import { DEFAULT_STYLE, drawOverlays } from "./draw.js";
import { InterpolationScrubber } from "./interp.js";
import { EditorStore } from "./state.js";

const PIXEL_SCALE = 4;

type Mode = "move" | "scale" | "rotate";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function startApp(baseUrl: string): void {
  const client = new TextonClient(baseUrl);
  const store = new EditorStore(client);

  const canvas = el<HTMLCanvasElement>("canvas");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas unsupported");
  const banner = el<HTMLDivElement>("banner");
  const replayBox = el<HTMLDivElement>("replay");
  const etaSlider = el<HTMLInputElement>("eta");
  const etaLabel = el<HTMLSpanElement>("eta-label");
  const preview = el<HTMLImageElement>("preview");

  let mode: Mode = "move";
  let scrubber: InterpolationScrubber | null = null;
  let background: HTMLImageElement | null = null;

  function repaint(): void {
    const { session, overlays, selected } = store.state;
    ctx!.setTransform(1, 0, 0, 1, 0, 0);
    ctx!.clearRect(0, 0, canvas.width, canvas.height);
    if (!session) return;
    canvas.width = session.frame.width * PIXEL_SCALE;
    canvas.height = session.frame.height * PIXEL_SCALE;
    ctx!.imageSmoothingEnabled = false;
    if (background) ctx!.drawImage(background, 0, 0, canvas.width, canvas.height);
    drawOverlays(ctx!, overlays, selected, PIXEL_SCALE, DEFAULT_STYLE);
  }

  function reloadRender(): void {
    const session = store.state.session;
    if (!session) return;
    const img = new Image();
    img.onload = () => {
      background = img;
      repaint();
    };
    img.src = client.renderUrl(session.id, { revision: store.state.renderTag });
  }

  store.subscribe(() => {
    banner.hidden = !store.state.banner;
    banner.textContent = store.state.banner?.message ?? "";
    replayBox.hidden = !store.state.replay;
    repaint();
  });

  // edits landed elsewhere change the revision, so re-fetch the bitmap
  let lastTag = -1;
  store.subscribe(() => {
    if (store.state.renderTag !== lastTag) {
      lastTag = store.state.renderTag;
      reloadRender();
    }
  });

  function canvasPoint(ev: MouseEvent): [number, number] {
    const rect = canvas.getBoundingClientRect();
    return [
      (ev.clientX - rect.left) / PIXEL_SCALE,
      (ev.clientY - rect.top) / PIXEL_SCALE,
    ];
  }

  let dragStart: [number, number] | null = null;
  canvas.addEventListener("mousedown", (ev) => {
    const p = canvasPoint(ev);
    store.select(p);
    dragStart = p;
  });
  canvas.addEventListener("mouseup", (ev) => {
    if (!dragStart) return;
    const p = canvasPoint(ev);
    const dx = p[0] - dragStart[0];
    const dy = p[1] - dragStart[1];
    dragStart = null;
    if (mode === "move") {
      void store.submitGesture({ kind: "drag", dx, dy });
    } else if (mode === "scale") {
      // vertical drag dials the factor: up grows, down shrinks
      void store.submitGesture({ kind: "scale", factor: Math.exp(-dy / 40) });
    } else {
      void store.submitGesture({ kind: "rotate", theta: dx / 40 });
    }
  });

  for (const m of ["move", "scale", "rotate"] as Mode[]) {
    el<HTMLButtonElement>(`mode-${m}`).addEventListener("click", () => {
      mode = m;
    });
  }
  el<HTMLButtonElement>("undo").addEventListener("click", () => void store.undo());
  el<HTMLButtonElement>("banner-dismiss").addEventListener("click", () =>
    store.dismissBanner(),
  );
  el<HTMLButtonElement>("replay-yes").addEventListener("click", () =>
    void store.confirmReplay(),
  );
  el<HTMLButtonElement>("replay-no").addEventListener("click", () =>
    store.dismissReplay(),
  );

  el<HTMLButtonElement>("new-session").addEventListener("click", () => {
    const k = Number(el<HTMLInputElement>("synth-k").value) || 5;
    void store.load({ synth: { k, width: 96, height: 96, seed: Date.now() % 1000 } });
  });

  el<HTMLInputElement>("target-doc").addEventListener("change", async (ev) => {
    const input = ev.target as HTMLInputElement;
    const file = input.files?.[0];
    const session = store.state.session;
    if (!file || !session) return;
    const target = JSON.parse(await file.text()) as TextonDocument;
    const source: TextonDocument = {
      format_version: session.format_version,
      frame: session.frame,
      n_f: session.n_f,
      capacity: session.capacity,
      gaussians: session.gaussians,
    };
    scrubber = new InterpolationScrubber(client, source, target);
    if (scrubber.disabled) {
      etaSlider.disabled = true;
      etaLabel.textContent = scrubber.disabledReason;
      return;
    }
    etaSlider.disabled = false;
    etaLabel.textContent = "eta 0.00";
    scrubber.onRender = (eta, png) => {
      etaLabel.textContent = `eta ${eta.toFixed(2)}`;
      preview.src = URL.createObjectURL(new Blob([png.slice()], { type: "image/png" }));
    };
    await scrubber.init();
    scrubber.setEta(Number(etaSlider.value));
  });

  etaSlider.addEventListener("input", () => {
    scrubber?.setEta(Number(etaSlider.value));
  });

  void store.load({ synth: { k: 5, width: 96, height: 96, seed: 0 } });
}
