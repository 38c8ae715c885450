import { describe, expect, it } from "vitest";

import { drawOverlays, type Context2DLike } from "../src/draw.js";
import { overlayFromState } from "../src/overlay.js";
import { gaussian, session } from "./helpers.js";

class CountingContext implements Context2DLike {
  strokeStyle: string | CanvasGradient | CanvasPattern = "";
  lineWidth = 0;
  globalAlpha = 1;
  ellipses: Array<{ x: number; y: number; rx: number; ry: number }> = [];
  ticks: Array<[number, number, number, number]> = [];
  strokes = 0;
  saves = 0;
  restores = 0;
  scales: Array<[number, number]> = [];
  alphasAtStroke: number[] = [];
  stylesAtStroke: Array<string | CanvasGradient | CanvasPattern> = [];

  private pathStart: [number, number] | null = null;

  save() {
    this.saves += 1;
  }
  restore() {
    this.restores += 1;
  }
  scale(x: number, y: number) {
    this.scales.push([x, y]);
  }
  translate() {}
  rotate() {}
  beginPath() {
    this.pathStart = null;
  }
  ellipse(x: number, y: number, rx: number, ry: number) {
    this.ellipses.push({ x, y, rx, ry });
  }
  moveTo(x: number, y: number) {
    this.pathStart = [x, y];
  }
  lineTo(x: number, y: number) {
    if (this.pathStart) this.ticks.push([...this.pathStart, x, y]);
  }
  stroke() {
    this.strokes += 1;
    this.alphasAtStroke.push(this.globalAlpha);
    this.stylesAtStroke.push(this.strokeStyle);
  }
  setLineDash() {}
}

describe("drawOverlays", () => {
  it("draws two ellipses and one direction tick per texton", () => {
    const ctx = new CountingContext();
    const overlays = overlayFromState(session([gaussian(), gaussian(), gaussian()]));
    drawOverlays(ctx, overlays, -1, 4);
    expect(ctx.ellipses).toHaveLength(6);
    expect(ctx.ticks).toHaveLength(3);
    expect(ctx.strokes).toBe(9);
    expect(ctx.saves).toBe(1);
    expect(ctx.restores).toBe(1);
    expect(ctx.scales).toEqual([[4, 4]]);
  });

  it("keeps everything in image coordinates under the pixel scale", () => {
    const ctx = new CountingContext();
    const overlays = overlayFromState(
      session([gaussian({ mean: [12, 7], cov: [[4, 0], [0, 1]] })]),
    );
    drawOverlays(ctx, overlays, -1, 8);
    expect(ctx.ellipses[0]).toMatchObject({ x: 12, y: 7, rx: 2, ry: 1 });
    expect(ctx.ellipses[1]).toMatchObject({ x: 12, y: 7, rx: 4, ry: 2 });
    expect(ctx.lineWidth).toBeCloseTo(1.5 / 8, 12);
  });

  it("highlights the selection and dims ineffective textons", () => {
    const ctx = new CountingContext();
    const overlays = overlayFromState(
      session([gaussian(), gaussian({ delta: 0.2 })]),
    );
    drawOverlays(ctx, overlays, 0, 4);
    // three strokes per overlay, in index order
    expect(ctx.stylesAtStroke.slice(0, 3)).toEqual([
      "#ffd24a",
      "#ffd24a",
      "#ffd24a",
    ]);
    expect(ctx.stylesAtStroke.slice(3)).toEqual(["#27e0a8", "#27e0a8", "#27e0a8"]);
    expect(ctx.alphasAtStroke.slice(0, 3)).toEqual([1, 1, 1]);
    expect(ctx.alphasAtStroke.slice(3)).toEqual([0.35, 0.35, 0.35]);
  });
});
