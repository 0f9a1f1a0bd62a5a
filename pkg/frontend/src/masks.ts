/**
 * Export per-frame 2D instance masks in the scene-bundle format:
 * masks/frame_%06d.json with row-major RLE bitmaps, labels and scores.
 *
 * The detector is pluggable; a production backend wraps an open-vocabulary
 * detector + promptable segmenter behind `Detector`. The adapter handles
 * vocabulary chunking, per-frame duplicate suppression and serialization.
 */
import * as fs from "fs";
import * as path from "path";

import { AdapterConfig, chunkPrompts } from "./config";
import { encodeRle } from "./rle";

export interface Detection {
  bits: Uint8Array; // H * W row-major
  label: string;
  score: number;
}

export interface FrameRef {
  frameId: number;
  width: number;
  height: number;
}

export interface Detector {
  detect(frame: FrameRef, vocabulary: string[], config: AdapterConfig): Detection[];
}

export function maskIouFlat(a: Uint8Array, b: Uint8Array): number {
  let inter = 0;
  let union = 0;
  for (let i = 0; i < a.length; i++) {
    const x = a[i] | b[i];
    union += x;
    inter += a[i] & b[i];
  }
  return union === 0 ? 0 : inter / union;
}

/** Greedy suppression: keep by descending score, drop anything overlapping
 *  a kept mask above the threshold. Ties broken by larger mask, then input
 *  order, so the result is deterministic. */
export function suppressDuplicates(dets: Detection[], iouMax: number): Detection[] {
  const area = dets.map((d) => d.bits.reduce((s, v) => s + v, 0));
  const order = dets
    .map((_, i) => i)
    .sort((i, j) => dets[j].score - dets[i].score || area[j] - area[i] || i - j);
  const kept: number[] = [];
  for (const i of order) {
    if (kept.every((j) => maskIouFlat(dets[i].bits, dets[j].bits) <= iouMax)) {
      kept.push(i);
    }
  }
  return kept.map((i) => dets[i]);
}

export function exportMasks(
  outDir: string,
  frames: FrameRef[],
  vocabulary: string[],
  detector: Detector,
  config: AdapterConfig,
): void {
  const masksDir = path.join(outDir, "masks");
  fs.mkdirSync(masksDir, { recursive: true });
  const chunks = chunkPrompts(vocabulary, config.promptChunkSize);
  for (const frame of frames) {
    let dets: Detection[] = [];
    for (const chunk of chunks) {
      dets = dets.concat(detector.detect(frame, chunk, config));
    }
    dets = dets.filter(
      (d) => d.score >= config.boxThreshold && d.bits.some((v) => v !== 0),
    );
    dets = suppressDuplicates(dets, config.dedupIou);
    const record = {
      frame_id: frame.frameId,
      width: frame.width,
      height: frame.height,
      masks: dets.map((d, k) => ({
        mask_id: k,
        rle: encodeRle(d.bits),
        label: d.label,
        score: d.score,
      })),
    };
    const name = `frame_${String(frame.frameId).padStart(6, "0")}.json`;
    fs.writeFileSync(path.join(masksDir, name), JSON.stringify(record) + "\n");
  }
}
