/** Adapter configuration and prompt batching. */

export type MaskModel = "grounded-sam" | "detic" | "seem" | "odise";

export interface AdapterConfig {
  maskModel: MaskModel;
  /** detector box confidence cutoff, in (0, 1) */
  boxThreshold: number;
  /** detector text confidence cutoff, in (0, 1) */
  textThreshold: number;
  /** vocabulary classes per detector prompt */
  promptChunkSize: number;
  /** crop enlargement factors around the projected-point box; the exact
   *  values follow common practice for multiscale CLIP cropping and are a
   *  documented default, not a hard contract */
  cropScales: number[];
  /** per-frame mask suppression threshold */
  dedupIou: number;
}

export function makeConfig(partial: Partial<AdapterConfig> = {}): AdapterConfig {
  const cfg: AdapterConfig = {
    maskModel: "grounded-sam",
    boxThreshold: 0.4,
    textThreshold: 0.4,
    promptChunkSize: 10,
    cropScales: [1.0, 1.5, 2.0],
    dedupIou: 0.5,
    ...partial,
  };
  for (const name of ["boxThreshold", "textThreshold"] as const) {
    const v = cfg[name];
    if (!(v > 0 && v < 1)) throw new Error(`${name} must lie in (0, 1), got ${v}`);
  }
  if (!Number.isInteger(cfg.promptChunkSize) || cfg.promptChunkSize < 1) {
    throw new Error(`promptChunkSize must be >= 1, got ${cfg.promptChunkSize}`);
  }
  if (cfg.cropScales.length === 0 || cfg.cropScales.some((s) => !(s > 0))) {
    throw new Error("cropScales must be positive and non-empty");
  }
  return cfg;
}

/** Split a vocabulary into detector prompts of at most `size` classes. */
export function chunkPrompts(vocabulary: string[], size: number): string[][] {
  const out: string[][] = [];
  for (let i = 0; i < vocabulary.length; i += size) {
    out.push(vocabulary.slice(i, i + size));
  }
  return out;
}
