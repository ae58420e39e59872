/** Projection arithmetic for service-supplied matrices.
 *
 * The client never builds a projection matrix; it only applies the 3x4
 * matrices the service hands out, so these helpers are deliberately dumb.
 */

export interface ProjectedPoint {
  u: number;
  v: number;
  depth: number;
}

/** Apply a served 3x4 projection to a world point. */
export function projectPoint(matrix: number[][], point: number[]): ProjectedPoint | null {
  const r0 = matrix[0]!;
  const r1 = matrix[1]!;
  const r2 = matrix[2]!;
  const x = point[0]!, y = point[1]!, z = point[2]!;
  const w = r2[0]! * x + r2[1]! * y + r2[2]! * z + r2[3]!;
  if (Math.abs(w) < 1e-12 || w < 0) {
    return null; // at or behind the camera
  }
  const u = (r0[0]! * x + r0[1]! * y + r0[2]! * z + r0[3]!) / w;
  const v = (r1[0]! * x + r1[1]! * y + r1[2]! * z + r1[3]!) / w;
  return { u, v, depth: w };
}

export type ViewportRole = "main" | "mirror";

/**
 * Map a projected pixel to canvas coordinates.
 *
 * Observer pixels are y-down with the origin at the principal point, so the
 * canvas origin sits at the viewport center. Mirror projections carry
 * y-flipped intrinsics (pixels y-up), which maps back to canvas y-down here;
 * that is what makes the mirror viewport look like a mirror.
 */
export function pixelToCanvas(
  pixel: { u: number; v: number },
  viewport: { width: number; height: number },
  role: ViewportRole,
): { x: number; y: number } {
  const x = viewport.width / 2 + pixel.u;
  const y = role === "mirror"
    ? viewport.height / 2 - pixel.v
    : viewport.height / 2 + pixel.v;
  return { x, y };
}

/** Squared distance between two canvas points (for consistency checks). */
export function canvasDistance(a: { x: number; y: number }, b: { x: number; y: number }): number {
  return Math.hypot(a.x - b.x, a.y - b.y);
}
