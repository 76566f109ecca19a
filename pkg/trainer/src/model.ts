/**
 * The denoiser architecture, mirrored from the shared census manifest:
 * 16 x 16 x 3 latents as 256 tokens, embed dim 32, two blocks of
 * (self-attention, single-token pose cross-attention, MLP), output layer
 * norm and projection. Row-vector convention: activations are [tokens, d]
 * and every weight multiplies on the right.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { Tape, Tensor } from "./tape.js";
import { Rng } from "./rng.js";
import { sharedDir } from "./schedule.js";

export interface Census {
  format: string;
  version: number;
  latent_shape: number[];
  embed_dim: number;
  heads: number;
  head_dim: number;
  blocks: number;
  mlp_hidden: number;
  weights: Record<string, number[]>;
}

export function loadCensus(): Census {
  const raw = readFileSync(join(sharedDir(), "census.json"), "utf-8");
  const census = JSON.parse(raw) as Census;
  if (census.format !== "ZTH1") throw new Error(`unsupported format ${census.format}`);
  return census;
}

export type Weights = Map<string, Tensor>;

export function initWeights(census: Census, seed: number): Weights {
  const rng = new Rng(seed, "weight-init");
  const weights: Weights = new Map();
  for (const [name, shape] of Object.entries(census.weights)) {
    const n = shape.reduce((a, b) => a * b, 1);
    const data = new Float64Array(n);
    if (name.endsWith(".g")) {
      data.fill(1);
    } else if (name.endsWith(".b") || name.endsWith(".b1") || name.endsWith(".b2")) {
      // biases stay zero
    } else {
      const fanIn = shape[0];
      const std = 1 / Math.sqrt(fanIn);
      for (let i = 0; i < n; i++) data[i] = std * rng.normal();
    }
    weights.set(name, new Tensor(data, [...shape], true));
  }
  return weights;
}

export function sinusoidalEmbedding(t: number, dim: number): Float64Array {
  const half = dim / 2;
  const out = new Float64Array(dim);
  for (let j = 0; j < half; j++) {
    const freq = Math.exp((-Math.log(10000) * j) / (half - 1));
    out[j] = Math.sin(t * freq);
    out[half + j] = Math.cos(t * freq);
  }
  return out;
}

export interface ForwardInput {
  /** Noised latent, flattened [tokens * channels]. */
  z: Float64Array;
  /** Clean source view, flattened [tokens * channels]. */
  source: Float64Array;
  t: number;
  pose: Float64Array; // [3]
}

/** Predicted noise as a [tokens, channels] tensor on the tape. */
export function forward(
  tape: Tape,
  weights: Weights,
  census: Census,
  input: ForwardInput,
): Tensor {
  const [gh, gw, ch] = census.latent_shape;
  const nTok = gh * gw;
  const d = census.embed_dim;
  const heads = census.heads;
  const w = (name: string): Tensor => {
    const tensor = weights.get(name);
    if (!tensor) throw new Error(`missing weight ${name}`);
    return tensor;
  };

  // Channel-concat the source view, then embed.
  const xData = new Float64Array(nTok * 2 * ch);
  for (let i = 0; i < nTok; i++) {
    for (let c = 0; c < ch; c++) {
      xData[i * 2 * ch + c] = input.z[i * ch + c];
      xData[i * 2 * ch + ch + c] = input.source[i * ch + c];
    }
  }
  const x = new Tensor(xData, [nTok, 2 * ch]);
  let tokens = tape.addBias(tape.matmul(x, w("embed.w")), w("embed.b"));

  const tEmbRow = new Tensor(sinusoidalEmbedding(input.t, d), [1, d]);
  const tEmb = tape.addBias(tape.matmul(tEmbRow, w("time.w")), w("time.b"));
  tokens = tape.addBias(tokens, tape.reshape(tEmb, [d]));

  const poseRow = new Tensor(Float64Array.from(input.pose), [1, 3]);
  const poseTok = tape.addBias(tape.matmul(poseRow, w("pose.w")), w("pose.b"));

  const invSqrtHd = 1 / Math.sqrt(census.head_dim);
  for (let b = 0; b < census.blocks; b++) {
    const p = `block${b}.`;

    const h1 = tape.layerNorm(tokens, w(p + "ln1.g"), w(p + "ln1.b"));
    const q = tape.splitHeads(tape.matmul(h1, w(p + "attn.wq")), heads);
    const k = tape.splitHeads(tape.matmul(h1, w(p + "attn.wk")), heads);
    const v = tape.splitHeads(tape.matmul(h1, w(p + "attn.wv")), heads);
    const scores = tape.scale(tape.bmmNT(q, k), invSqrtHd);
    const attn = tape.bmm(tape.softmaxRows(scores), v);
    tokens = tape.add(tokens, tape.matmul(tape.mergeHeads(attn), w(p + "attn.wo")));

    // Single-token cross-attention: softmax over one key is identically 1,
    // so the output is the value token broadcast through wo.
    const h2 = tape.layerNorm(tokens, w(p + "ln2.g"), w(p + "ln2.b"));
    const qc = tape.splitHeads(tape.matmul(h2, w(p + "cross.wq")), heads);
    const kc = tape.splitHeads(tape.matmul(poseTok, w(p + "cross.wk")), heads);
    const vc = tape.splitHeads(tape.matmul(poseTok, w(p + "cross.wv")), heads);
    const crossScores = tape.scale(tape.bmmNT(qc, kc), invSqrtHd);
    const cross = tape.bmm(tape.softmaxRows(crossScores), vc);
    tokens = tape.add(tokens, tape.matmul(tape.mergeHeads(cross), w(p + "cross.wo")));

    const h3 = tape.layerNorm(tokens, w(p + "ln3.g"), w(p + "ln3.b"));
    const hidden = tape.relu(tape.addBias(tape.matmul(h3, w(p + "mlp.w1")), w(p + "mlp.b1")));
    tokens = tape.add(tokens, tape.addBias(tape.matmul(hidden, w(p + "mlp.w2")), w(p + "mlp.b2")));
  }

  const out = tape.layerNorm(tokens, w("out_ln.g"), w("out_ln.b"));
  return tape.addBias(tape.matmul(out, w("out.w")), w("out.b"));
}
