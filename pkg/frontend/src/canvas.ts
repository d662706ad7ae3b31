/** Top-view canvas rendering — a pure function of the scene payload. */

import type { PlacementDoc, SceneDoc } from "./types.js";
import { boxCorners, canvasToWorld, fitRoom, pointInBox, worldToCanvas, type Mapping, type Viewport } from "./transform.js";

const CATEGORY_COLORS = [
  "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
  "#76b7b2", "#edc948", "#9c755f", "#bab0ac", "#d37295",
];

export function categoryColor(category: string): string {
  let h = 0;
  for (let i = 0; i < category.length; i++) {
    h = (h * 31 + category.charCodeAt(i)) >>> 0;
  }
  return CATEGORY_COLORS[h % CATEGORY_COLORS.length];
}

export interface SceneView {
  mapping: Mapping;
  /** Placement index under a canvas point, topmost (highest elevation) first. */
  hitTest(px: number, py: number): number | null;
}

function tracePolygon(
  ctx: CanvasRenderingContext2D,
  m: Mapping,
  corners: [number, number][],
): void {
  ctx.beginPath();
  corners.forEach(([x, y], i) => {
    const [px, py] = worldToCanvas(m, x, y);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.closePath();
}

/**
 * Draw the scene; placements whose object id is in `highlighted` get the
 * selection treatment. Returns a view object for hit testing.
 */
export function drawScene(
  canvas: HTMLCanvasElement,
  scene: SceneDoc,
  highlighted: ReadonlySet<string>,
  objectIds: string[],
): SceneView {
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d context unavailable");
  const vp: Viewport = { width: canvas.width, height: canvas.height, margin: 24 };
  const m = fitRoom(scene.room.width, scene.room.depth, vp);

  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#fafaf7";
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  // room outline
  ctx.strokeStyle = "#333";
  ctx.lineWidth = 2;
  tracePolygon(ctx, m, boxCorners(0, 0, scene.room.width, scene.room.depth, 0));
  ctx.stroke();

  // draw low objects first so supported items sit on top
  const order = scene.placements
    .map((p, i) => ({ p, i }))
    .sort((a, b) => a.p.elevation - b.p.elevation);
  for (const { p, i } of order) {
    const corners = boxCorners(p.center[0], p.center[1], p.size[0], p.size[1], p.angle);
    const selected = highlighted.has(objectIds[i]);
    tracePolygon(ctx, m, corners);
    ctx.fillStyle = categoryColor(p.category) + (selected ? "ff" : "99");
    ctx.fill();
    ctx.strokeStyle = selected ? "#1a7f37" : "#555";
    ctx.lineWidth = selected ? 3 : 1;
    ctx.stroke();
    const [tx, ty] = worldToCanvas(m, p.center[0], p.center[1]);
    ctx.fillStyle = "#222";
    ctx.font = "11px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(p.category, tx, ty);
  }

  return {
    mapping: m,
    hitTest(px: number, py: number): number | null {
      const [wx, wy] = canvasToWorld(m, px, py);
      let best: number | null = null;
      let bestElev = -Infinity;
      scene.placements.forEach((p: PlacementDoc, i: number) => {
        if (
          pointInBox(wx, wy, p.center[0], p.center[1], p.size[0], p.size[1], p.angle) &&
          p.elevation >= bestElev
        ) {
          best = i;
          bestElev = p.elevation;
        }
      });
      return best;
    },
  };
}
