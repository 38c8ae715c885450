/**
 * Maps completed pointer gestures to single edit commands.
 *
 * Identity gestures (zero drag, unit scale, zero rotation) map to null so
 * accidental clicks never generate server traffic or burn undo history.
 */

import type { EditCommand } from "./api.js";

export type Gesture =
  | { kind: "drag"; dx: number; dy: number }
  | { kind: "scale"; factor: number }
  | { kind: "rotate"; theta: number };

export function commandForGesture(index: number, gesture: Gesture): EditCommand | null {
  if (index < 0) return null;
  switch (gesture.kind) {
    case "drag":
      if (gesture.dx === 0 && gesture.dy === 0) return null;
      return { op: "move", index, delta: [gesture.dx, gesture.dy] };
    case "scale":
      if (!(gesture.factor > 0) || gesture.factor === 1) return null;
      return { op: "scale", index, factor: gesture.factor };
    case "rotate":
      if (gesture.theta === 0 || !Number.isFinite(gesture.theta)) return null;
      return { op: "rotate", index, theta: gesture.theta };
  }
}
