/**
 * Noise-prediction training loop for the toy denoiser.
 *
 * Each step draws a sprite, a uniform timestep, and Gaussian noise, builds
 * the noised latent, and regresses the model output onto the noise with
 * Adam. Weights are exported in the ZTH1 container the sampling engine
 * loads directly; a JSON report records the loss curve.
 *
 * Usage: node dist/train.js [--steps N] [--seed N] [--lr X]
 *        [--out PATH] [--report PATH]
 */

import { writeFileSync } from "node:fs";
import { join } from "node:path";
import { makeSprite } from "./dataset.js";
import { forward, initWeights, loadCensus, Weights } from "./model.js";
import { Rng } from "./rng.js";
import { alphaBar, loadConstants, qSample, sharedDir } from "./schedule.js";
import { Tape, Tensor } from "./tape.js";
import { encodeZth, ZthEntry } from "./zth.js";

interface Args {
  steps: number;
  seed: number;
  lr: number;
  out: string;
  report: string;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    steps: 3000,
    seed: 0,
    lr: 3e-3,
    out: join(sharedDir(), "weights.zth"),
    report: join(sharedDir(), "training_report.json"),
  };
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (value === undefined) throw new Error(`missing value for ${key}`);
    switch (key) {
      case "--steps": args.steps = Number(value); break;
      case "--seed": args.seed = Number(value); break;
      case "--lr": args.lr = Number(value); break;
      case "--out": args.out = value; break;
      case "--report": args.report = value; break;
      default: throw new Error(`unknown argument ${key}`);
    }
  }
  return args;
}

class Adam {
  private m = new Map<string, Float64Array>();
  private v = new Map<string, Float64Array>();
  private step = 0;

  constructor(
    private weights: Weights,
    private lr: number,
    private beta1 = 0.9,
    private beta2 = 0.999,
    private eps = 1e-8,
  ) {
    for (const [name, tensor] of weights) {
      this.m.set(name, new Float64Array(tensor.size));
      this.v.set(name, new Float64Array(tensor.size));
    }
  }

  update(): void {
    this.step += 1;
    const bc1 = 1 - Math.pow(this.beta1, this.step);
    const bc2 = 1 - Math.pow(this.beta2, this.step);
    for (const [name, tensor] of this.weights) {
      const g = tensor.grad!;
      const m = this.m.get(name)!;
      const v = this.v.get(name)!;
      for (let i = 0; i < tensor.size; i++) {
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g[i];
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g[i] * g[i];
        tensor.data[i] -=
          (this.lr * (m[i] / bc1)) / (Math.sqrt(v[i] / bc2) + this.eps);
        g[i] = 0;
      }
    }
  }
}

export function exportWeights(weights: Weights, census: ReturnType<typeof loadCensus>): Uint8Array {
  const entries: ZthEntry[] = [];
  for (const name of Object.keys(census.weights)) {
    const tensor = weights.get(name)!;
    entries.push({
      name,
      shape: [...tensor.shape],
      data: Float32Array.from(tensor.data),
    });
  }
  return encodeZth(entries);
}

export function trainLoop(
  steps: number,
  seed: number,
  lr: number,
  logEvery = 100,
): { weights: Weights; losses: number[]; census: ReturnType<typeof loadCensus> } {
  const census = loadCensus();
  const constants = loadConstants();
  const ab = alphaBar(constants);
  const weights = initWeights(census, seed);
  const adam = new Adam(weights, lr);
  const rng = new Rng(seed, "train");
  const zeroPose = new Float64Array(3);
  const latentSize = census.latent_shape.reduce((a, b) => a * b, 1);
  const [gh, gw, ch] = census.latent_shape;

  const blank = new Float64Array(latentSize).fill(1);
  const losses: number[] = [];
  let windowSum = 0;
  for (let step = 0; step < steps; step++) {
    const sprite = makeSprite(seed, rng.int(0, 4096), gh, gw);
    const t = rng.int(1, constants.T + 1);
    const noise = rng.normals(latentSize);
    const z = qSample(ab, sprite.image, t, noise);
    // Condition dropout: half the time the source view is blank, so the
    // model learns both source-guided reconstruction and unconditional
    // sprite generation.
    const source = rng.next() < 0.5 ? blank : sprite.image;

    const tape = new Tape();
    const pred = forward(tape, weights, census, {
      z,
      source,
      t,
      pose: zeroPose,
    });
    const loss = tape.mseLoss(tape.reshape(pred, [latentSize]), noise);
    tape.backward(loss);
    adam.update();

    windowSum += loss.data[0];
    if ((step + 1) % logEvery === 0) {
      losses.push(windowSum / logEvery);
      windowSum = 0;
    }
  }
  return { weights, losses, census };
}

function main(): void {
  const args = parseArgs(process.argv.slice(2));
  const started = Date.now();
  const { weights, losses, census } = trainLoop(args.steps, args.seed, args.lr);
  writeFileSync(args.out, exportWeights(weights, census));
  const report = {
    steps: args.steps,
    seed: args.seed,
    lr: args.lr,
    loss_curve: losses.map((x) => Number(x.toFixed(6))),
    final_loss: losses[losses.length - 1],
    elapsed_seconds: Number(((Date.now() - started) / 1000).toFixed(1)),
    weights_file: args.out,
  };
  writeFileSync(args.report, JSON.stringify(report, null, 2) + "\n");
  console.log(JSON.stringify({ out: args.out, final_loss: report.final_loss }));
}

const isMain = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (isMain) main();
