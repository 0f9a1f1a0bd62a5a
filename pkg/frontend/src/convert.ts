/**
 * Convert a ScanNet-style capture directory into a scene bundle:
 *
 *     intrinsic.txt        3x3 (or 4x4) pinhole matrix, whitespace separated
 *     pose/<i>.txt         4x4 camera-to-world matrix per frame
 *     depth/<i>.png        16-bit depth map per frame (value / scale = meters)
 *     cloud.ply            reconstructed point cloud (binary LE, xyz + rgb)
 *
 * Depth PNGs are copied verbatim; poses are inverted to the world-to-camera
 * [R|c] convention the pipeline expects.
 */
import * as fs from "fs";
import * as path from "path";

import { readPly } from "./ply";

export function readMatrixFile(p: string): number[][] {
  return fs
    .readFileSync(p, "utf8")
    .trim()
    .split("\n")
    .map((line) => line.trim().split(/\s+/).map(Number));
}

/** Image size from the PNG IHDR chunk; no pixel decoding needed. */
export function pngSize(p: string): { width: number; height: number } {
  const fd = fs.openSync(p, "r");
  const head = Buffer.alloc(24);
  fs.readSync(fd, head, 0, 24, 0);
  fs.closeSync(fd);
  if (head.readUInt32BE(0) !== 0x89504e47) throw new Error(`${p}: not a PNG`);
  return { width: head.readUInt32BE(16), height: head.readUInt32BE(20) };
}

export function invertPose(pose: number[][]): number[][] {
  // camera-to-world [R t] -> world-to-camera [R^T | -R^T t]
  const out: number[][] = [];
  for (let r = 0; r < 3; r++) {
    const row = [pose[0][r], pose[1][r], pose[2][r], 0];
    row[3] = -(row[0] * pose[0][3] + row[1] * pose[1][3] + row[2] * pose[2][3]);
    out.push(row);
  }
  return out;
}

export function convertSequence(
  inDir: string,
  outDir: string,
  depthScale: number = 1000.0,
): number {
  const intrinsic = readMatrixFile(path.join(inDir, "intrinsic.txt"))
    .slice(0, 3)
    .map((row) => row.slice(0, 3));
  const poseDir = path.join(inDir, "pose");
  const ids = fs
    .readdirSync(poseDir)
    .filter((f) => f.endsWith(".txt"))
    .map((f) => parseInt(path.basename(f, ".txt"), 10))
    .sort((a, b) => a - b);
  if (ids.length === 0) throw new Error(`no pose files under ${poseDir}`);

  const framesDir = path.join(outDir, "frames");
  fs.mkdirSync(framesDir, { recursive: true });
  fs.copyFileSync(path.join(inDir, "cloud.ply"), path.join(outDir, "cloud.ply"));

  for (const id of ids) {
    const depthSrc = path.join(inDir, "depth", `${id}.png`);
    if (!fs.existsSync(depthSrc)) throw new Error(`missing depth map ${depthSrc}`);
    const { width, height } = pngSize(depthSrc);
    const padded = String(id).padStart(6, "0");
    fs.copyFileSync(depthSrc, path.join(framesDir, `depth_${padded}.png`));
    const pose = readMatrixFile(path.join(poseDir, `${id}.txt`));
    const record = {
      frame_id: id,
      intrinsics: intrinsic,
      extrinsics: invertPose(pose),
      width,
      height,
      depth: `depth_${padded}.png`,
    };
    fs.writeFileSync(
      path.join(framesDir, `frame_${padded}.json`),
      JSON.stringify(record) + "\n",
    );
  }
  fs.writeFileSync(
    path.join(outDir, "manifest.json"),
    JSON.stringify({
      version: 1,
      n_points: readPly(path.join(outDir, "cloud.ply")).count,
      n_frames: ids.length,
      depth_scale: depthScale,
    }) + "\n",
  );
  return ids.length;
}
