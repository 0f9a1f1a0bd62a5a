import * as fs from "fs";
import * as path from "path";
import { beforeAll, describe, expect, it } from "vitest";

import { embedMultiscale, exportClipFeatures, validateViewIndex } from "../src/clipFeatures";
import { makeConfig } from "../src/config";
import { HashEmbedder } from "../src/embedder";
import { readMatrix } from "../src/o3df";
import { makeSceneWithProposals, norm, runPython } from "./helpers";

let scene: string;

beforeAll(() => {
  scene = makeSceneWithProposals();
}, 120_000);

describe("view feature export", () => {
  it("writes unit-norm rows with a valid index", () => {
    const embedder = new HashEmbedder(32);
    const out = exportClipFeatures(
      scene, path.join(scene, "proposals_final.json"), embedder, 5, makeConfig(),
    );
    expect(out.rows).toBeGreaterThan(0);
    expect(out.entries).toBe(out.rows);
    validateViewIndex(scene);

    const m = readMatrix(path.join(scene, "clip", "view_features.o3df"));
    expect(m.cols).toBe(32);
    for (let r = 0; r < m.rows; r++) {
      expect(Math.abs(norm(m.data.subarray(r * m.cols, (r + 1) * m.cols) as Float64Array) - 1))
        .toBeLessThan(1e-4);
    }
  });

  it("caps each proposal at the requested number of views", () => {
    exportClipFeatures(
      scene, path.join(scene, "proposals_final.json"), new HashEmbedder(16), 2, makeConfig(),
    );
    const idx = JSON.parse(
      fs.readFileSync(path.join(scene, "clip", "view_index.json"), "utf8"),
    );
    const perProposal = new Map<number, number>();
    for (const e of idx.entries) {
      perProposal.set(e.proposal, (perProposal.get(e.proposal) ?? 0) + 1);
      expect(e.frame).toBeGreaterThanOrEqual(0);
    }
    for (const count of perProposal.values()) expect(count).toBeLessThanOrEqual(2);
  });

  it("loads through the pipeline view-feature reader", () => {
    exportClipFeatures(
      scene, path.join(scene, "proposals_final.json"), new HashEmbedder(24), 5, makeConfig(),
    );
    const out = runPython(
      `import numpy as np
from lift3d.pipeline import load_view_features
from lift3d.scene import load_scene_bundle
scene = load_scene_bundle(${JSON.stringify(scene)})
feats = load_view_features(scene)
assert feats, "no entries"
for v in feats.values():
    assert v.shape == (24,)
    assert abs(np.linalg.norm(v) - 1) <= 1e-4
print(len(feats))`,
    );
    expect(parseInt(out, 10)).toBeGreaterThan(0);
  });

  it("identical crops at every scale equal the single-crop embedding", () => {
    const embedder = new HashEmbedder(16);
    // a box already spanning the image clamps identically at every scale
    const full: [number, number, number, number] = [0, 0, 64, 48];
    const multi = embedMultiscale(embedder, 0, full, [1.0, 1.5, 2.0], 64, 48);
    const single = embedMultiscale(embedder, 0, full, [1.0], 64, 48);
    for (let i = 0; i < 16; i++) expect(multi[i]).toBeCloseTo(single[i], 10);
  });

  it("is deterministic across repeated export", () => {
    const args = [scene, path.join(scene, "proposals_final.json")] as const;
    exportClipFeatures(args[0], args[1], new HashEmbedder(16), 3, makeConfig());
    const first = fs.readFileSync(path.join(scene, "clip", "view_features.o3df"));
    const firstIdx = fs.readFileSync(path.join(scene, "clip", "view_index.json"));
    exportClipFeatures(args[0], args[1], new HashEmbedder(16), 3, makeConfig());
    expect(fs.readFileSync(path.join(scene, "clip", "view_features.o3df")).equals(first)).toBe(true);
    expect(fs.readFileSync(path.join(scene, "clip", "view_index.json")).equals(firstIdx)).toBe(true);
  });
});
