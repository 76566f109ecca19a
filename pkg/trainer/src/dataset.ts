/**
 * Procedural sprite dataset: one or two filled axis-aligned rectangles of a
 * random solid color on a white background, rendered on the latent grid.
 * Every sample is derived purely from (seed, index), so the dataset is
 * reproducible without any files.
 */

import { Rng } from "./rng.js";

export interface Sprite {
  /** Flattened [h * w * 3] image in [0, 1]. */
  image: Float64Array;
}

export function makeSprite(seed: number, index: number, h = 16, w = 16): Sprite {
  const rng = new Rng(seed ^ (index * 0x9e3779b1), "sprite");
  const image = new Float64Array(h * w * 3).fill(1);
  const nRects = 1 + (rng.next() < 0.35 ? 1 : 0);
  for (let r = 0; r < nRects; r++) {
    const rw = rng.int(4, 10);
    const rh = rng.int(4, 10);
    const x0 = rng.int(0, w - rw);
    const y0 = rng.int(0, h - rh);
    const color = [0.15 + 0.7 * rng.next(), 0.15 + 0.7 * rng.next(), 0.15 + 0.7 * rng.next()];
    for (let y = y0; y < y0 + rh; y++) {
      for (let x = x0; x < x0 + rw; x++) {
        const o = (y * w + x) * 3;
        image[o] = color[0];
        image[o + 1] = color[1];
        image[o + 2] = color[2];
      }
    }
  }
  return { image };
}
