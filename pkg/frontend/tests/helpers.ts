import { execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";

/** Run a Python snippet against the installed pipeline package; throws on a
 *  non-zero exit and returns stdout. */
export function runPython(script: string): string {
  return execFileSync("python3", ["-c", script], { encoding: "utf8" });
}

export function pipelineCli(args: string[]): void {
  const script =
    "import sys\nfrom lift3d.cli import main\nsys.exit(main(sys.argv[1:]))";
  execFileSync("python3", ["-c", script, ...args], { encoding: "utf8" });
}

export function tmpDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

/** Small synthetic scene bundle rendered by the pipeline's generator, with
 *  2D-guided proposals already computed. */
export function makeSceneWithProposals(): string {
  const dir = path.join(tmpDir("adapters-"), "scene");
  pipelineCli([
    "synth", "--seed", "3", "--objects", "3", "--frames", "6",
    "--points-per-object", "300", "--out", dir,
  ]);
  const cfg = ["--frame-subsample", "1", "--min-size", "5", "--min-points", "20"];
  pipelineCli(["superpoints", "--scene", dir, ...cfg]);
  pipelineCli(["propose2d", "--scene", dir, ...cfg]);
  pipelineCli(["combine", "--scene", dir, "--only-2d", ...cfg]);
  return dir;
}

export function norm(v: Float64Array): number {
  let s = 0;
  for (const x of v) s += x * x;
  return Math.sqrt(s);
}
