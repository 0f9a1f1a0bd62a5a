/** Pinhole projection helpers used when picking views and crop boxes. */

export const NEAR_EPS = 1e-6;

export interface FrameRecord {
  frame_id: number;
  intrinsics: number[][]; // 3 x 3
  extrinsics: number[][]; // 3 x 4 world-to-camera [R|c]
  width: number;
  height: number;
  depth: string;
  rgb?: string;
}

export interface Projected {
  px: Float64Array;
  py: Float64Array;
  z: Float64Array;
  inBounds: Uint8Array;
}

export function projectPoints(
  positions: Float64Array,
  frame: FrameRecord,
): Projected {
  const n = positions.length / 3;
  const K = frame.intrinsics;
  const E = frame.extrinsics;
  const px = new Float64Array(n);
  const py = new Float64Array(n);
  const z = new Float64Array(n);
  const inBounds = new Uint8Array(n);
  for (let i = 0; i < n; i++) {
    const x = positions[3 * i];
    const y = positions[3 * i + 1];
    const w = positions[3 * i + 2];
    const cx = E[0][0] * x + E[0][1] * y + E[0][2] * w + E[0][3];
    const cy = E[1][0] * x + E[1][1] * y + E[1][2] * w + E[1][3];
    const cz = E[2][0] * x + E[2][1] * y + E[2][2] * w + E[2][3];
    z[i] = cz;
    if (cz <= NEAR_EPS) continue;
    const u = (K[0][0] * cx + K[0][1] * cy + K[0][2] * cz) / cz;
    const v = (K[1][1] * cy + K[1][2] * cz) / cz;
    px[i] = u;
    py[i] = v;
    if (u >= 0 && u < frame.width && v >= 0 && v < frame.height) {
      inBounds[i] = 1;
    }
  }
  return { px, py, z, inBounds };
}

export type Box = [number, number, number, number]; // x0, y0, x1, y1

/** Axis-aligned box of the in-bounds projections of the masked points. */
export function projectedBox(
  proj: Projected,
  mask: Uint8Array,
): Box | null {
  let x0 = Infinity, y0 = Infinity, x1 = -Infinity, y1 = -Infinity;
  let any = false;
  for (let i = 0; i < mask.length; i++) {
    if (!mask[i] || !proj.inBounds[i]) continue;
    any = true;
    if (proj.px[i] < x0) x0 = proj.px[i];
    if (proj.px[i] > x1) x1 = proj.px[i];
    if (proj.py[i] < y0) y0 = proj.py[i];
    if (proj.py[i] > y1) y1 = proj.py[i];
  }
  return any ? [x0, y0, x1, y1] : null;
}

/** Scale a box about its center, then clamp to the image rectangle. */
export function scaleClampBox(
  box: Box,
  scale: number,
  width: number,
  height: number,
): Box {
  const cx = (box[0] + box[2]) / 2;
  const cy = (box[1] + box[3]) / 2;
  const hw = ((box[2] - box[0]) / 2) * scale;
  const hh = ((box[3] - box[1]) / 2) * scale;
  return [
    Math.max(0, cx - hw),
    Math.max(0, cy - hh),
    Math.min(width, cx + hw),
    Math.min(height, cy + hh),
  ];
}
