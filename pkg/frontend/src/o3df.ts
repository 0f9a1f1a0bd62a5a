/**
 * Binary matrix files: magic "O3DF", u32 version, u64 rows, u64 cols
 * (all little-endian), then float32 row-major payload.
 */
import * as fs from "fs";

const MAGIC = "O3DF";
const VERSION = 1;
const HEADER_BYTES = 4 + 4 + 8 + 8;

export interface Matrix {
  rows: number;
  cols: number;
  data: Float64Array; // row-major, rows * cols
}

export function writeMatrix(path: string, m: Matrix): void {
  if (m.data.length !== m.rows * m.cols) {
    throw new Error(`data length ${m.data.length} != ${m.rows}x${m.cols}`);
  }
  for (const v of m.data) {
    if (!Number.isFinite(v)) throw new Error("matrix contains non-finite values");
  }
  const buf = Buffer.alloc(HEADER_BYTES + 4 * m.data.length);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(VERSION, 4);
  buf.writeBigUInt64LE(BigInt(m.rows), 8);
  buf.writeBigUInt64LE(BigInt(m.cols), 16);
  for (let i = 0; i < m.data.length; i++) {
    buf.writeFloatLE(m.data[i], HEADER_BYTES + 4 * i);
  }
  fs.writeFileSync(path, buf);
}

export function readMatrix(path: string): Matrix {
  const buf = fs.readFileSync(path);
  if (buf.length < HEADER_BYTES || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`${path}: not a matrix file`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) throw new Error(`${path}: unsupported version ${version}`);
  const rows = Number(buf.readBigUInt64LE(8));
  const cols = Number(buf.readBigUInt64LE(16));
  if (buf.length !== HEADER_BYTES + 4 * rows * cols) {
    throw new Error(`${path}: truncated payload`);
  }
  const data = new Float64Array(rows * cols);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readFloatLE(HEADER_BYTES + 4 * i);
  }
  return { rows, cols, data };
}
