import { describe, expect, it } from "vitest";
import { Tape, Tensor } from "../src/tape.js";
import { forward, initWeights, loadCensus } from "../src/model.js";
import { Rng } from "../src/rng.js";

describe("tape primitives", () => {
  it("matmul matches a hand example", () => {
    const tape = new Tape();
    const a = Tensor.from([1, 2, 3, 4], [2, 2]);
    const b = Tensor.from([5, 6, 7, 8], [2, 2]);
    const out = tape.matmul(a, b);
    expect([...out.data]).toEqual([19, 22, 43, 50]);
  });

  it("softmax rows sum to one and are shift invariant", () => {
    const tape = new Tape();
    const x = Tensor.from([1, 2, 3, -5, 0, 5], [2, 3]);
    const s = tape.softmaxRows(x);
    for (let r = 0; r < 2; r++) {
      const sum = s.data[r * 3] + s.data[r * 3 + 1] + s.data[r * 3 + 2];
      expect(sum).toBeCloseTo(1, 12);
    }
    const shifted = new Tape().softmaxRows(Tensor.from([101, 102, 103, 95, 100, 105], [2, 3]));
    for (let i = 0; i < 6; i++) expect(shifted.data[i]).toBeCloseTo(s.data[i], 12);
  });

  it("layer norm normalizes rows under unit gain", () => {
    const tape = new Tape();
    const x = Tensor.from([1, 2, 3, 4, 10, 20, 30, 40], [2, 4]);
    const g = Tensor.from([1, 1, 1, 1], [4]);
    const b = Tensor.from([0, 0, 0, 0], [4]);
    const y = tape.layerNorm(x, g, b);
    for (let r = 0; r < 2; r++) {
      let mu = 0;
      for (let j = 0; j < 4; j++) mu += y.data[r * 4 + j];
      expect(mu / 4).toBeCloseTo(0, 10);
    }
  });

  it("split/merge heads round-trips", () => {
    const tape = new Tape();
    const x = Tensor.from(Array.from({ length: 24 }, (_, i) => i), [3, 8]);
    const back = tape.mergeHeads(tape.splitHeads(x, 2));
    expect([...back.data]).toEqual([...x.data]);
  });
});

describe("gradients by central differences", () => {
  function checkGradient(
    build: (tape: Tape, params: Tensor) => Tensor,
    init: number[],
    shape: number[],
    tol = 1e-6,
  ): void {
    const params = new Tensor(Float64Array.from(init), shape, true);
    const tape = new Tape();
    const loss = build(tape, params);
    tape.backward(loss);
    const analytic = Float64Array.from(params.grad!);
    const h = 1e-5;
    for (let i = 0; i < params.size; i++) {
      const keep = params.data[i];
      params.data[i] = keep + h;
      const up = build(new Tape(), params).data[0];
      params.data[i] = keep - h;
      const down = build(new Tape(), params).data[0];
      params.data[i] = keep;
      const numeric = (up - down) / (2 * h);
      expect(Math.abs(analytic[i] - numeric)).toBeLessThan(tol);
    }
  }

  it("matmul + relu + mse chain", () => {
    const target = new Float64Array([0.3, -0.2, 0.5, 0.1]);
    const fixed = Tensor.from([0.5, -1, 0.25, 2], [2, 2]);
    checkGradient(
      (tape, p) => tape.mseLoss(tape.reshape(tape.relu(tape.matmul(fixed, p)), [4]), target),
      [0.4, -0.3, 0.8, 0.6],
      [2, 2],
    );
  });

  it("layer norm parameters and input", () => {
    const target = new Float64Array([0.1, 0.2, -0.1, 0.4, 0, 0.3, -0.2, 0.1]);
    checkGradient(
      (tape, p) => {
        const x = tape.reshape(p, [2, 4]);
        const g = Tensor.from([1.2, 0.8, 1.0, 0.9], [4]);
        const b = Tensor.from([0.1, 0, -0.1, 0.05], [4]);
        return tape.mseLoss(tape.reshape(tape.layerNorm(x, g, b), [8]), target);
      },
      [0.5, -0.2, 0.8, 0.1, -0.4, 0.9, 0.3, -0.6],
      [8],
      1e-5,
    );
  });

  it("softmax-weighted value gather", () => {
    const target = new Float64Array([0.2, -0.1]);
    checkGradient(
      (tape, p) => {
        const scores = tape.reshape(p, [1, 1, 2]);
        const v = Tensor.from([0.7, -0.3, 0.2, 0.9], [1, 2, 2]);
        const out = tape.bmm(tape.softmaxRows(scores), v);
        return tape.mseLoss(tape.reshape(out, [2]), target);
      },
      [0.3, -0.5],
      [2],
    );
  });

  it("full model finite-difference spot check", () => {
    const census = loadCensus();
    const weights = initWeights(census, 5);
    const rng = new Rng(9, "probe");
    const latentSize = census.latent_shape.reduce((a, b) => a * b, 1);
    const input = {
      z: rng.normals(latentSize),
      source: Float64Array.from({ length: latentSize }, () => rng.next()),
      t: 640,
      pose: new Float64Array([0.1, -0.2, 0.05]),
    };
    const target = rng.normals(latentSize);
    const run = () => {
      const tape = new Tape();
      const pred = forward(tape, weights, census, input);
      const loss = tape.mseLoss(tape.reshape(pred, [latentSize]), target);
      return { tape, loss };
    };
    const { tape, loss } = run();
    tape.backward(loss);
    // A handful of parameters spread across the network.
    const picks: Array<[string, number]> = [
      ["embed.w", 3],
      ["block0.attn.wq", 17],
      ["block0.cross.wv", 5],
      ["block1.mlp.w1", 101],
      ["block1.ln3.g", 7],
      ["out.w", 11],
    ];
    const h = 1e-4;
    for (const [name, idx] of picks) {
      const tensor = weights.get(name)!;
      const analytic = tensor.grad![idx];
      const keep = tensor.data[idx];
      tensor.data[idx] = keep + h;
      const up = run().loss.data[0];
      tensor.data[idx] = keep - h;
      const down = run().loss.data[0];
      tensor.data[idx] = keep;
      const numeric = (up - down) / (2 * h);
      expect(Math.abs(analytic - numeric)).toBeLessThan(1e-5);
    }
  });
});
