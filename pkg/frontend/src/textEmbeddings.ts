/**
 * Export text-query embeddings: queries/text_embeddings.o3df rows aligned
 * with queries/prompts.json order.
 */
import * as fs from "fs";
import * as path from "path";

import { Embedder } from "./embedder";
import { writeMatrix } from "./o3df";

export function exportTextEmbeddings(
  outDir: string,
  prompts: string[],
  embedder: Embedder,
  classIds?: number[],
): void {
  if (prompts.length === 0) throw new Error("at least one prompt required");
  if (prompts.some((p) => p.length === 0)) throw new Error("empty prompt");
  const ids = classIds ?? prompts.map((_, i) => i);
  if (ids.length !== prompts.length) {
    throw new Error("class_ids length must match prompts");
  }
  const dim = embedder.dim;
  const data = new Float64Array(prompts.length * dim);
  prompts.forEach((p, i) => data.set(embedder.embedText(p), i * dim));

  const queriesDir = path.join(outDir, "queries");
  fs.mkdirSync(queriesDir, { recursive: true });
  writeMatrix(path.join(queriesDir, "text_embeddings.o3df"), {
    rows: prompts.length,
    cols: dim,
    data,
  });
  fs.writeFileSync(
    path.join(queriesDir, "prompts.json"),
    JSON.stringify({ prompts, class_ids: ids }) + "\n",
  );
}
