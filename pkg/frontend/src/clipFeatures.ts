/**
 * Export per-(proposal, view) image features: for each 3D proposal, pick the
 * views with the most projected points, crop around the projected box at the
 * configured scales, embed each crop, average and L2-normalize. Writes
 * clip/view_features.o3df plus clip/view_index.json, the files the pipeline's
 * feature-pooling stage consumes.
 */
import * as fs from "fs";
import * as path from "path";

import { AdapterConfig } from "./config";
import { Embedder, ImagePatch } from "./embedder";
import { Box, FrameRecord, projectPoints, projectedBox, scaleClampBox } from "./geometry";
import { readMatrix, writeMatrix } from "./o3df";
import { readPly } from "./ply";
import { decodeRle } from "./rle";

export interface BundleFrames {
  nPoints: number;
  positions: Float64Array;
  frames: FrameRecord[];
}

export function loadBundleFrames(bundleDir: string): BundleFrames {
  const cloud = readPly(path.join(bundleDir, "cloud.ply"));
  const framesDir = path.join(bundleDir, "frames");
  const frames = fs
    .readdirSync(framesDir)
    .filter((f) => /^frame_\d+\.json$/.test(f))
    .sort()
    .map((f) => JSON.parse(fs.readFileSync(path.join(framesDir, f), "utf8")) as FrameRecord);
  if (frames.length === 0) throw new Error(`no frame records under ${framesDir}`);
  return { nPoints: cloud.count, positions: cloud.positions, frames };
}

export function loadProposalMasks(proposalsPath: string, nPoints: number): Uint8Array[] {
  const rec = JSON.parse(fs.readFileSync(proposalsPath, "utf8"));
  const n = rec.n_points ?? nPoints;
  if (n !== nPoints) {
    throw new Error(`${proposalsPath}: proposals over ${n} points, cloud has ${nPoints}`);
  }
  return rec.proposals.map((p: { rle: number[] }) => decodeRle(p.rle, n));
}

/** Average of the crop embeddings at every scale, renormalized. */
export function embedMultiscale(
  embedder: Embedder,
  frameId: number,
  box: Box,
  scales: number[],
  width: number,
  height: number,
): Float64Array {
  const acc = new Float64Array(embedder.dim);
  for (const s of scales) {
    const crop = scaleClampBox(box, s, width, height);
    const patch: ImagePatch = { frameId, box: crop };
    const v = embedder.embedImage(patch);
    for (let i = 0; i < acc.length; i++) acc[i] += v[i];
  }
  let norm = 0;
  for (const x of acc) norm += x * x;
  norm = Math.sqrt(norm);
  if (norm > 0) for (let i = 0; i < acc.length; i++) acc[i] /= norm;
  return acc;
}

export function exportClipFeatures(
  bundleDir: string,
  proposalsPath: string,
  embedder: Embedder,
  topViews: number,
  config: AdapterConfig,
): { rows: number; entries: number } {
  const bundle = loadBundleFrames(bundleDir);
  const masks = loadProposalMasks(proposalsPath, bundle.nPoints);
  const projections = bundle.frames.map((f) => projectPoints(bundle.positions, f));

  const entries: { proposal: number; frame: number; row: number }[] = [];
  const rows: Float64Array[] = [];
  for (let k = 0; k < masks.length; k++) {
    const counts = bundle.frames.map((f, fi) => {
      let c = 0;
      const proj = projections[fi];
      for (let i = 0; i < masks[k].length; i++) {
        if (masks[k][i] && proj.inBounds[i]) c++;
      }
      return { frameId: f.frame_id, fi, c };
    });
    const visible = counts
      .filter((x) => x.c > 0)
      .sort((a, b) => b.c - a.c || a.frameId - b.frameId)
      .slice(0, topViews);
    // a proposal seen in no frame is simply left out of the index
    for (const view of visible) {
      const frame = bundle.frames[view.fi];
      const box = projectedBox(projections[view.fi], masks[k]);
      if (!box) continue;
      const feat = embedMultiscale(
        embedder, frame.frame_id, box, config.cropScales, frame.width, frame.height,
      );
      entries.push({ proposal: k, frame: frame.frame_id, row: rows.length });
      rows.push(feat);
    }
  }

  const clipDir = path.join(bundleDir, "clip");
  fs.mkdirSync(clipDir, { recursive: true });
  const data = new Float64Array(rows.length * embedder.dim);
  rows.forEach((r, i) => data.set(r, i * embedder.dim));
  writeMatrix(path.join(clipDir, "view_features.o3df"), {
    rows: rows.length,
    cols: embedder.dim,
    data,
  });
  fs.writeFileSync(
    path.join(clipDir, "view_index.json"),
    JSON.stringify({ entries }) + "\n",
  );
  return { rows: rows.length, entries: entries.length };
}

/** Sanity check used by tests: every index row points into the matrix. */
export function validateViewIndex(bundleDir: string): void {
  const clipDir = path.join(bundleDir, "clip");
  const m = readMatrix(path.join(clipDir, "view_features.o3df"));
  const idx = JSON.parse(
    fs.readFileSync(path.join(clipDir, "view_index.json"), "utf8"),
  );
  for (const e of idx.entries) {
    if (!(e.row >= 0 && e.row < m.rows)) {
      throw new Error(`index row ${e.row} outside matrix with ${m.rows} rows`);
    }
  }
}
