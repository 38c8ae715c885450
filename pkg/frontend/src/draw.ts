/**
 * Canvas drawing for the overlay layer.
 *
 * Takes a minimal context interface so tests can count calls without a
 * real canvas. The server render is drawn first (scaled to the canvas);
 * ellipses and ticks are drawn in image coordinates under one transform.
 */

import type { OverlayGaussian } from "./overlay.js";

export interface Context2DLike {
  save(): void;
  restore(): void;
  scale(x: number, y: number): void;
  translate(x: number, y: number): void;
  rotate(angle: number): void;
  beginPath(): void;
  ellipse(
    x: number,
    y: number,
    radiusX: number,
    radiusY: number,
    rotation: number,
    startAngle: number,
    endAngle: number,
  ): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  setLineDash(segments: number[]): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
}

export interface DrawStyle {
  stroke: string;
  selectedStroke: string;
  dimAlpha: number;
}

export const DEFAULT_STYLE: DrawStyle = {
  stroke: "#27e0a8",
  selectedStroke: "#ffd24a",
  dimAlpha: 0.35,
};

export function drawOverlays(
  ctx: Context2DLike,
  overlays: OverlayGaussian[],
  selected: number,
  pixelScale: number,
  style: DrawStyle = DEFAULT_STYLE,
): void {
  ctx.save();
  ctx.scale(pixelScale, pixelScale);
  ctx.lineWidth = 1.5 / pixelScale;
  for (const g of overlays) {
    ctx.strokeStyle = g.index === selected ? style.selectedStroke : style.stroke;
    ctx.globalAlpha = g.effective ? 1.0 : style.dimAlpha;

    ctx.setLineDash([]);
    ctx.beginPath();
    ctx.ellipse(g.center[0], g.center[1], g.sigma1.r1, g.sigma1.r2, g.sigma1.angle, 0, 2 * Math.PI);
    ctx.stroke();

    ctx.setLineDash([3 / pixelScale, 3 / pixelScale]);
    ctx.beginPath();
    ctx.ellipse(g.center[0], g.center[1], g.sigma2.r1, g.sigma2.r2, g.sigma2.angle, 0, 2 * Math.PI);
    ctx.stroke();

    ctx.setLineDash([]);
    ctx.beginPath();
    ctx.moveTo(g.center[0], g.center[1]);
    ctx.lineTo(g.tick[0], g.tick[1]);
    ctx.stroke();
  }
  ctx.restore();
}
