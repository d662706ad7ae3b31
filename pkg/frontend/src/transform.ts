/** World (meters, y up) ↔ canvas (pixels, y down) mapping. */

export interface Viewport {
  width: number;
  height: number;
  margin: number;
}

export interface Mapping {
  scale: number;
  offsetX: number;
  offsetY: number;
}

/** Fit a room of the given extent into the viewport, centered. */
export function fitRoom(
  roomWidth: number,
  roomDepth: number,
  vp: Viewport,
): Mapping {
  const scale = Math.min(
    (vp.width - 2 * vp.margin) / roomWidth,
    (vp.height - 2 * vp.margin) / roomDepth,
  );
  return {
    scale,
    offsetX: vp.width / 2,
    offsetY: vp.height / 2,
  };
}

export function worldToCanvas(
  m: Mapping,
  x: number,
  y: number,
): [number, number] {
  return [m.offsetX + x * m.scale, m.offsetY - y * m.scale];
}

export function canvasToWorld(
  m: Mapping,
  px: number,
  py: number,
): [number, number] {
  return [(px - m.offsetX) / m.scale, (m.offsetY - py) / m.scale];
}

/** The four corners of a rotated box, counterclockwise in world space. */
export function boxCorners(
  cx: number,
  cy: number,
  sx: number,
  sy: number,
  angle: number,
): [number, number][] {
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const hx = sx / 2;
  const hy = sy / 2;
  const local: [number, number][] = [
    [hx, hy],
    [-hx, hy],
    [-hx, -hy],
    [hx, -hy],
  ];
  return local.map(([lx, ly]) => [cx + lx * c - ly * s, cy + lx * s + ly * c]);
}

/** Point-in-rotated-box test in world coordinates. */
export function pointInBox(
  px: number,
  py: number,
  cx: number,
  cy: number,
  sx: number,
  sy: number,
  angle: number,
): boolean {
  const c = Math.cos(-angle);
  const s = Math.sin(-angle);
  const dx = px - cx;
  const dy = py - cy;
  const lx = dx * c - dy * s;
  const ly = dx * s + dy * c;
  return Math.abs(lx) <= sx / 2 && Math.abs(ly) <= sy / 2;
}
