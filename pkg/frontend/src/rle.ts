/**
 * Run-length codec for flat binary masks: alternating run counts starting
 * with the number of leading zeros. Matches the pipeline's JSON mask format.
 */

export function encodeRle(bits: ArrayLike<number | boolean>): number[] {
  const counts: number[] = [];
  let current = 0; // runs start with zeros
  let run = 0;
  for (let i = 0; i < bits.length; i++) {
    const v = bits[i] ? 1 : 0;
    if (v === current) {
      run++;
    } else {
      counts.push(run);
      current = v;
      run = 1;
    }
  }
  counts.push(run);
  if (bits.length === 0) counts.length = 0;
  return counts;
}

export function decodeRle(counts: number[], n: number): Uint8Array {
  const out = new Uint8Array(n);
  let pos = 0;
  let value = 0;
  for (const c of counts) {
    if (!Number.isInteger(c) || c < 0) {
      throw new Error(`invalid run count ${c}`);
    }
    if (value) out.fill(1, pos, pos + c);
    pos += c;
    value ^= 1;
  }
  if (pos !== n) {
    throw new Error(`run counts sum to ${pos}, expected ${n}`);
  }
  return out;
}
