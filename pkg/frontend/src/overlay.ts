/**
 * Pure geometry for the canvas overlay.
 *
 * Everything here is a function of the last server payload: ellipse axes
 * come from the closed-form eigendecomposition of each 2x2 covariance,
 * and selection ranks textons by Mahalanobis distance, so a click prefers
 * the blob that actually covers the cursor over the nearest center.
 */

import type { GaussianRecord, SessionState } from "./api.js";

export interface EllipseSpec {
  /** rotation of the major axis, radians, in image coordinates */
  angle: number;
  /** major radius (one standard deviation) */
  r1: number;
  /** minor radius */
  r2: number;
}

export interface OverlayGaussian {
  index: number;
  center: [number, number];
  sigma1: EllipseSpec;
  sigma2: EllipseSpec;
  /** endpoint of the direction tick, drawn from the center */
  tick: [number, number];
  /** existence weight above 1/2 draws solid, below draws dimmed */
  effective: boolean;
}

export function ellipseFromCov(cov: [[number, number], [number, number]]): EllipseSpec {
  const a = cov[0][0];
  const b = cov[0][1];
  const c = cov[1][1];
  const half = (a + c) / 2;
  const spread = Math.hypot((a - c) / 2, b);
  const l1 = Math.max(half + spread, 0);
  const l2 = Math.max(half - spread, 0);
  return {
    angle: 0.5 * Math.atan2(2 * b, a - c),
    r1: Math.sqrt(l1),
    r2: Math.sqrt(l2),
  };
}

export function overlayGaussian(g: GaussianRecord, index: number): OverlayGaussian {
  const sigma1 = ellipseFromCov(g.cov);
  const tickLen = sigma1.r1;
  return {
    index,
    center: [g.mean[0], g.mean[1]],
    sigma1,
    sigma2: { angle: sigma1.angle, r1: 2 * sigma1.r1, r2: 2 * sigma1.r2 },
    tick: [g.mean[0] + g.dir[0] * tickLen, g.mean[1] + g.dir[1] * tickLen],
    effective: g.delta >= 0.5,
  };
}

export function overlayFromState(state: SessionState): OverlayGaussian[] {
  return state.gaussians.map(overlayGaussian);
}

/** Squared Mahalanobis distance (p - mean)ᵀ cov⁻¹ (p - mean). */
export function mahalanobisSq(
  point: [number, number],
  mean: [number, number],
  cov: [[number, number], [number, number]],
): number {
  const dx = point[0] - mean[0];
  const dy = point[1] - mean[1];
  const a = cov[0][0];
  const b = cov[0][1];
  const c = cov[1][1];
  const det = a * c - b * b;
  if (!(det > 0)) return Number.POSITIVE_INFINITY;
  return (c * dx * dx - 2 * b * dx * dy + a * dy * dy) / det;
}

/** Index of the texton nearest the point in Mahalanobis distance, or -1. */
export function nearestTexton(state: SessionState, point: [number, number]): number {
  let best = -1;
  let bestDist = Number.POSITIVE_INFINITY;
  state.gaussians.forEach((g, i) => {
    const d = mahalanobisSq(point, g.mean, g.cov);
    if (d < bestDist) {
      bestDist = d;
      best = i;
    }
  });
  return best;
}
