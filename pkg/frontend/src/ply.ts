/**
 * Minimal binary little-endian PLY reader/writer for clouds stored as
 * float32 x/y/z plus uint8 red/green/blue, the layout used by scene bundles.
 */
import * as fs from "fs";

export interface Cloud {
  count: number;
  positions: Float64Array; // count * 3
  colors: Float64Array;    // count * 3 in [0, 1]
}

const RECORD_BYTES = 12 + 3;

export function readPly(path: string): Cloud {
  const buf = fs.readFileSync(path);
  const headerEnd = buf.indexOf("end_header\n");
  if (headerEnd < 0 || buf.toString("ascii", 0, 3) !== "ply") {
    throw new Error(`${path}: not a binary PLY file`);
  }
  const header = buf.toString("ascii", 0, headerEnd);
  if (!header.includes("format binary_little_endian")) {
    throw new Error(`${path}: only binary little-endian PLY supported`);
  }
  const match = header.match(/element vertex (\d+)/);
  if (!match) throw new Error(`${path}: missing vertex element`);
  const count = parseInt(match[1], 10);
  const start = headerEnd + "end_header\n".length;
  if (buf.length < start + count * RECORD_BYTES) {
    throw new Error(`${path}: truncated payload`);
  }
  const positions = new Float64Array(count * 3);
  const colors = new Float64Array(count * 3);
  for (let i = 0; i < count; i++) {
    const off = start + i * RECORD_BYTES;
    for (let a = 0; a < 3; a++) {
      positions[3 * i + a] = buf.readFloatLE(off + 4 * a);
      colors[3 * i + a] = buf.readUInt8(off + 12 + a) / 255;
    }
  }
  return { count, positions, colors };
}

export function writePly(path: string, cloud: Cloud): void {
  const header =
    "ply\nformat binary_little_endian 1.0\n" +
    `element vertex ${cloud.count}\n` +
    "property float x\nproperty float y\nproperty float z\n" +
    "property uchar red\nproperty uchar green\nproperty uchar blue\n" +
    "end_header\n";
  const head = Buffer.from(header, "ascii");
  const body = Buffer.alloc(cloud.count * RECORD_BYTES);
  for (let i = 0; i < cloud.count; i++) {
    const off = i * RECORD_BYTES;
    for (let a = 0; a < 3; a++) {
      body.writeFloatLE(cloud.positions[3 * i + a], off + 4 * a);
      const c = Math.min(255, Math.max(0, Math.round(cloud.colors[3 * i + a] * 255)));
      body.writeUInt8(c, off + 12 + a);
    }
  }
  fs.writeFileSync(path, Buffer.concat([head, body]));
}
