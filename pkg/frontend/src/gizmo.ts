/** 6-DOF nudge gizmo: accumulate keyboard/button deltas, commit whole ones.
 *
 * Exactly one handle is active at a time; a commit hands the accumulated
 * delta to the caller (who sends nudge_virtual) and clears the state. The
 * gizmo locks once the session is finalized.
 */

import { NudgeDelta } from "./protocol.js";

export type GizmoHandle =
  | "translate-x" | "translate-y" | "translate-z"
  | "rotate-x" | "rotate-y" | "rotate-z";

export const TRANSLATE_STEP_MM = 1.0;
export const ROTATE_STEP_DEG = 0.5;
export const COARSE_MULTIPLIER = 10;

const AXIS: Record<GizmoHandle, 0 | 1 | 2> = {
  "translate-x": 0, "translate-y": 1, "translate-z": 2,
  "rotate-x": 0, "rotate-y": 1, "rotate-z": 2,
};

export function zeroDelta(): NudgeDelta {
  return { translation_mm: [0, 0, 0], rotation_deg: [0, 0, 0] };
}

export function isZero(delta: NudgeDelta): boolean {
  return delta.translation_mm.every((v) => v === 0)
    && delta.rotation_deg.every((v) => v === 0);
}

export class GizmoState {
  activeHandle: GizmoHandle = "translate-x";
  locked = false;
  private delta: NudgeDelta = zeroDelta();

  setHandle(handle: GizmoHandle): void {
    this.activeHandle = handle;
  }

  /** Accumulate `steps` ticks on the active handle; coarse = x10. */
  nudge(steps: number, coarse = false): NudgeDelta {
    if (this.locked) {
      throw new Error("gizmo is locked after finalize");
    }
    const scale = coarse ? COARSE_MULTIPLIER : 1;
    const axis = AXIS[this.activeHandle];
    if (this.activeHandle.startsWith("translate")) {
      this.delta.translation_mm[axis] += steps * scale * TRANSLATE_STEP_MM;
    } else {
      this.delta.rotation_deg[axis] += steps * scale * ROTATE_STEP_DEG;
    }
    return this.pendingDelta();
  }

  pendingDelta(): NudgeDelta {
    return {
      translation_mm: [...this.delta.translation_mm],
      rotation_deg: [...this.delta.rotation_deg],
    };
  }

  /** Hand over the whole accumulated delta and reset. */
  commit(): NudgeDelta | null {
    if (isZero(this.delta)) return null;
    const out = this.pendingDelta();
    this.delta = zeroDelta();
    return out;
  }

  lock(): void {
    this.locked = true;
    this.delta = zeroDelta();
  }
}

/** Keyboard mapping: arrows/PageUp-Down move along the active handle. */
export function stepsForKey(key: string): number | null {
  switch (key) {
    case "ArrowUp":
    case "ArrowRight":
    case "PageUp":
      return 1;
    case "ArrowDown":
    case "ArrowLeft":
    case "PageDown":
      return -1;
    default:
      return null;
  }
}
