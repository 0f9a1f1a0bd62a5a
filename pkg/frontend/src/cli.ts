/**
 * Command-line entry points:
 *
 *   ts-node src/cli.ts clip-features --scene DIR --proposals FILE [--dim D] [--top-views L]
 *   ts-node src/cli.ts text-embeddings --out DIR --prompt P [--prompt P ...] [--dim D]
 *   ts-node src/cli.ts convert --in DIR --out DIR [--depth-scale S]
 */
import { parseArgs } from "util";

import { exportClipFeatures } from "./clipFeatures";
import { makeConfig } from "./config";
import { convertSequence } from "./convert";
import { HashEmbedder } from "./embedder";
import { exportTextEmbeddings } from "./textEmbeddings";

function fail(msg: string): never {
  process.stderr.write(msg + "\n");
  process.exit(2);
}

export function main(argv: string[]): void {
  const cmd = argv[0];
  const rest = argv.slice(1);
  if (cmd === "clip-features") {
    const { values } = parseArgs({
      args: rest,
      options: {
        scene: { type: "string" },
        proposals: { type: "string" },
        dim: { type: "string", default: "64" },
        "top-views": { type: "string", default: "5" },
      },
    });
    if (!values.scene) fail("--scene is required");
    const proposals = values.proposals ?? `${values.scene}/proposals_final.json`;
    const out = exportClipFeatures(
      values.scene,
      proposals,
      new HashEmbedder(parseInt(values.dim!, 10)),
      parseInt(values["top-views"]!, 10),
      makeConfig(),
    );
    process.stdout.write(`wrote ${out.rows} view-feature rows\n`);
  } else if (cmd === "text-embeddings") {
    const { values } = parseArgs({
      args: rest,
      options: {
        out: { type: "string" },
        prompt: { type: "string", multiple: true },
        dim: { type: "string", default: "64" },
      },
    });
    if (!values.out || !values.prompt?.length) fail("--out and --prompt are required");
    exportTextEmbeddings(values.out, values.prompt, new HashEmbedder(parseInt(values.dim!, 10)));
    process.stdout.write(`wrote ${values.prompt.length} prompt embeddings\n`);
  } else if (cmd === "convert") {
    const { values } = parseArgs({
      args: rest,
      options: {
        in: { type: "string" },
        out: { type: "string" },
        "depth-scale": { type: "string", default: "1000" },
      },
    });
    if (!values.in || !values.out) fail("--in and --out are required");
    const n = convertSequence(values.in, values.out, parseFloat(values["depth-scale"]!));
    process.stdout.write(`converted ${n} frames\n`);
  } else {
    fail("usage: cli.ts <clip-features|text-embeddings|convert> ...");
  }
}

if (require.main === module) {
  main(process.argv.slice(2));
}
