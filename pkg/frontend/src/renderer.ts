/** Pure scene-to-drawlist rendering; the canvas wrapper is at the bottom. */

import { pixelToCanvas, projectPoint, ViewportRole } from "./math.js";
import { SceneSnapshot } from "./protocol.js";

export interface ViewportSpec {
  id: string;
  role: ViewportRole;
  title: string;
  projection: number[][];
  width: number;
  height: number;
}

export interface Polyline {
  points: Array<{ x: number; y: number }>;
  kind: "real" | "virtual";
}

export interface ViewportDrawList {
  viewport: ViewportSpec;
  polylines: Polyline[];
}

/** One viewport per frustum: the main observer plus every frozen mirror. */
export function viewportSpecs(scene: SceneSnapshot): ViewportSpec[] {
  const { width, height } = scene.viewport;
  const specs: ViewportSpec[] = [{
    id: "main",
    role: "main",
    title: "observer",
    projection: scene.observer.projection,
    width,
    height,
  }];
  for (const mirror of scene.mirrors) {
    specs.push({
      id: String(mirror.id),
      role: "mirror",
      title: `mirror ${mirror.id} (D=${mirror.d_mm.toFixed(0)} mm)`,
      projection: mirror.projection,
      width,
      height,
    });
  }
  return specs;
}

/** Project one world-space polyline, splitting it where it leaves the view. */
export function projectSegments(
  segments: number[][][],
  spec: ViewportSpec,
  kind: "real" | "virtual",
): Polyline[] {
  const out: Polyline[] = [];
  for (const polyline of segments) {
    let current: Array<{ x: number; y: number }> = [];
    for (const point of polyline) {
      const projected = projectPoint(spec.projection, point);
      if (projected === null) {
        if (current.length > 1) out.push({ points: current, kind });
        current = [];
        continue;
      }
      current.push(pixelToCanvas(projected, spec, spec.role));
    }
    if (current.length > 1) out.push({ points: current, kind });
  }
  return out;
}

export function buildDrawLists(scene: SceneSnapshot): ViewportDrawList[] {
  return viewportSpecs(scene).map((viewport) => ({
    viewport,
    polylines: [
      ...projectSegments(scene.real_segments, viewport, "real"),
      ...projectSegments(scene.virtual_segments, viewport, "virtual"),
    ],
  }));
}

const STROKES = { real: "#8a8f98", virtual: "rgba(64, 156, 255, 0.85)" } as const;

/** Paint a draw list onto a 2D canvas context. */
export function paintDrawList(
  ctx: CanvasRenderingContext2D,
  drawList: ViewportDrawList,
): void {
  const { width, height } = drawList.viewport;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#14161a";
  ctx.fillRect(0, 0, width, height);
  for (const polyline of drawList.polylines) {
    ctx.strokeStyle = STROKES[polyline.kind];
    ctx.lineWidth = polyline.kind === "virtual" ? 2.5 : 2.0;
    ctx.beginPath();
    polyline.points.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
    ctx.stroke();
  }
}
