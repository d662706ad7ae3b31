/** Sketch-mode model: unlabeled boxes in a room rectangle. */

import type { LayoutDoc } from "./types.js";

export interface SketchBox {
  cx: number;
  cy: number;
  sx: number;
  sy: number;
  angle: number;
}

export interface SketchState {
  roomWidth: number;
  roomDepth: number;
  boxes: SketchBox[];
}

export function emptySketch(roomWidth = 4.2, roomDepth = 4.2): SketchState {
  return { roomWidth, roomDepth, boxes: [] };
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, v));
}

/** Add a box, clamping its center into the room. */
export function addBox(state: SketchState, box: SketchBox): SketchState {
  const hw = state.roomWidth / 2;
  const hd = state.roomDepth / 2;
  const clamped = {
    ...box,
    cx: clamp(box.cx, -hw, hw),
    cy: clamp(box.cy, -hd, hd),
    sx: Math.max(box.sx, 0.05),
    sy: Math.max(box.sy, 0.05),
  };
  return { ...state, boxes: [...state.boxes, clamped] };
}

export function removeBox(state: SketchState, index: number): SketchState {
  return { ...state, boxes: state.boxes.filter((_, i) => i !== index) };
}

export function updateBox(
  state: SketchState,
  index: number,
  patch: Partial<SketchBox>,
): SketchState {
  return {
    ...state,
    boxes: state.boxes.map((b, i) => (i === index ? { ...b, ...patch } : b)),
  };
}

export function rotateBox(state: SketchState, index: number): SketchState {
  const b = state.boxes[index];
  return updateBox(state, index, { angle: b.angle + Math.PI / 2 });
}

/** Serialize for POST /api/layout2scene. */
export function buildLayoutDoc(state: SketchState): LayoutDoc {
  return {
    format_version: "grains-layout/1",
    room: { width: state.roomWidth, depth: state.roomDepth },
    boxes: state.boxes.map((b) => ({
      center: [b.cx, b.cy],
      size: [b.sx, b.sy],
      angle: b.angle,
    })),
  };
}
