/**
 * Embedding backends. Production deployments implement `Embedder` on top of
 * a vision-language checkpoint (e.g. a ViT-L/14 image/text tower served via
 * ONNX or an HTTP endpoint); everything downstream only relies on the
 * interface: deterministic, unit-norm vectors of a fixed dimension.
 *
 * `HashEmbedder` is the shipped stand-in for environments without model
 * weights. It derives a unit vector from a SHA-256 of the input, so equal
 * inputs always embed identically and distinct inputs are near-orthogonal
 * in expectation.
 */
import { createHash } from "crypto";

export interface ImagePatch {
  frameId: number;
  /** crop rectangle in pixels: x0, y0, x1, y1 */
  box: [number, number, number, number];
  /** raw crop bytes when pixel data is available */
  data?: Buffer;
}

export interface Embedder {
  readonly dim: number;
  embedImage(patch: ImagePatch): Float64Array;
  embedText(prompt: string): Float64Array;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export class HashEmbedder implements Embedder {
  constructor(readonly dim: number = 64) {
    if (dim < 2) throw new Error("embedding dim must be >= 2");
  }

  private fromKey(key: Buffer): Float64Array {
    const digest = createHash("sha256").update(key).digest();
    const rand = mulberry32(digest.readUInt32LE(0) ^ digest.readUInt32LE(4));
    const v = new Float64Array(this.dim);
    let norm = 0;
    for (let i = 0; i < this.dim; i += 2) {
      // Box-Muller for an isotropic direction
      const u1 = Math.max(rand(), 1e-12);
      const u2 = rand();
      const r = Math.sqrt(-2 * Math.log(u1));
      v[i] = r * Math.cos(2 * Math.PI * u2);
      if (i + 1 < this.dim) v[i + 1] = r * Math.sin(2 * Math.PI * u2);
    }
    for (const x of v) norm += x * x;
    norm = Math.sqrt(norm);
    for (let i = 0; i < this.dim; i++) v[i] /= norm;
    return v;
  }

  embedImage(patch: ImagePatch): Float64Array {
    if (patch.data) return this.fromKey(patch.data);
    const key = `img:${patch.frameId}:` + patch.box.map((b) => b.toFixed(4)).join(",");
    return this.fromKey(Buffer.from(key, "utf8"));
  }

  embedText(prompt: string): Float64Array {
    if (!prompt) throw new Error("empty prompt");
    return this.fromKey(Buffer.from(`txt:${prompt}`, "utf8"));
  }
}
