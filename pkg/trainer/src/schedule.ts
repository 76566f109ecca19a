/**
 * Forward-process constants, read from the shared interop manifest so the
 * trainer and the sampling engine can never drift apart.
 */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

export interface ForwardConstants {
  T: number;
  beta_schedule: string;
  beta_start: number;
  beta_end: number;
}

const here = dirname(fileURLToPath(import.meta.url));

export function sharedDir(): string {
  // src/ and dist/ sit at the same depth inside trainer/, so the shared
  // interop directory is two levels up either way.
  return join(here, "..", "..", "shared");
}

export function loadConstants(): ForwardConstants {
  const raw = readFileSync(join(sharedDir(), "constants.json"), "utf-8");
  const c = JSON.parse(raw) as ForwardConstants;
  if (c.beta_schedule !== "scaled_linear") {
    throw new Error(`unsupported beta schedule ${c.beta_schedule}`);
  }
  return c;
}

/** alpha_bar table indexed 0..T with alpha_bar[0] = 1. */
export function alphaBar(c: ForwardConstants): Float64Array {
  const ab = new Float64Array(c.T + 1);
  ab[0] = 1;
  const s0 = Math.sqrt(c.beta_start);
  const s1 = Math.sqrt(c.beta_end);
  for (let t = 1; t <= c.T; t++) {
    const s = s0 + ((t - 1) / (c.T - 1)) * (s1 - s0);
    ab[t] = ab[t - 1] * (1 - s * s);
  }
  return ab;
}

/** z_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise. */
export function qSample(
  ab: Float64Array,
  x0: Float64Array,
  t: number,
  noise: Float64Array,
): Float64Array {
  const a = Math.sqrt(ab[t]);
  const b = Math.sqrt(1 - ab[t]);
  const out = new Float64Array(x0.length);
  for (let i = 0; i < x0.length; i++) out[i] = a * x0[i] + b * noise[i];
  return out;
}
