import { describe, expect, it } from "vitest";
import { makeSprite } from "../src/dataset.js";
import { forward, initWeights, loadCensus, sinusoidalEmbedding } from "../src/model.js";
import { Rng } from "../src/rng.js";
import { alphaBar, loadConstants, qSample } from "../src/schedule.js";
import { exportWeights, trainLoop } from "../src/train.js";
import { decodeZth, encodeZth } from "../src/zth.js";
import { Tape } from "../src/tape.js";

describe("schedule", () => {
  it("matches the frozen beta-product value at t=500", () => {
    const ab = alphaBar(loadConstants());
    expect(ab[0]).toBe(1);
    expect(ab[500]).toBeCloseTo(0.27766965045646763, 12);
  });

  it("q_sample interpolates signal and noise", () => {
    const ab = alphaBar(loadConstants());
    const z = qSample(ab, new Float64Array([1]), 500, new Float64Array([1]));
    expect(z[0]).toBeCloseTo(Math.sqrt(ab[500]) + Math.sqrt(1 - ab[500]), 12);
  });
});

describe("dataset", () => {
  it("is deterministic in (seed, index)", () => {
    const a = makeSprite(1, 42);
    const b = makeSprite(1, 42);
    const c = makeSprite(1, 43);
    expect([...a.image]).toEqual([...b.image]);
    expect([...a.image]).not.toEqual([...c.image]);
  });

  it("draws on a white background within [0, 1]", () => {
    const s = makeSprite(3, 7);
    let background = 0;
    for (let i = 0; i < s.image.length; i++) {
      expect(s.image[i]).toBeGreaterThanOrEqual(0);
      expect(s.image[i]).toBeLessThanOrEqual(1);
      if (s.image[i] === 1) background++;
    }
    expect(background).toBeGreaterThan(0);
    expect(background).toBeLessThan(s.image.length);
  });
});

describe("zth container", () => {
  it("round-trips entries bit-exactly", () => {
    const rng = new Rng(4, "zth");
    const entries = [
      { name: "a.w", shape: [2, 3], data: Float32Array.from(rng.normals(6)) },
      { name: "b", shape: [4], data: Float32Array.from(rng.normals(4)) },
    ];
    const back = decodeZth(encodeZth(entries));
    expect(back.map((e) => e.name)).toEqual(["a.w", "b"]);
    expect(back[0].shape).toEqual([2, 3]);
    expect([...back[0].data]).toEqual([...entries[0].data]);
    expect([...back[1].data]).toEqual([...entries[1].data]);
  });

  it("rejects bad magic", () => {
    expect(() => decodeZth(new Uint8Array([1, 2, 3, 4, 0, 0, 0, 0]))).toThrow(/magic/);
  });
});

describe("model", () => {
  it("covers the census exactly", () => {
    const census = loadCensus();
    const weights = initWeights(census, 0);
    expect([...weights.keys()].sort()).toEqual(Object.keys(census.weights).sort());
    for (const [name, shape] of Object.entries(census.weights)) {
      expect(weights.get(name)!.shape).toEqual(shape);
    }
  });

  it("sinusoidal embedding starts at sin 0 / cos 1", () => {
    const e = sinusoidalEmbedding(0, 32);
    for (let j = 0; j < 16; j++) {
      expect(e[j]).toBeCloseTo(0, 12);
      expect(e[16 + j]).toBeCloseTo(1, 12);
    }
  });

  it("forward output is finite and deterministic", () => {
    const census = loadCensus();
    const weights = initWeights(census, 2);
    const rng = new Rng(6, "fwd");
    const latentSize = census.latent_shape.reduce((a, b) => a * b, 1);
    const input = {
      z: rng.normals(latentSize),
      source: Float64Array.from({ length: latentSize }, () => rng.next()),
      t: 300,
      pose: new Float64Array(3),
    };
    const out1 = forward(new Tape(), weights, census, input);
    const out2 = forward(new Tape(), weights, census, input);
    expect(out1.shape).toEqual([256, 3]);
    for (let i = 0; i < out1.size; i++) {
      expect(Number.isFinite(out1.data[i])).toBe(true);
      expect(out1.data[i]).toBe(out2.data[i]);
    }
  });
});

describe("training", () => {
  it("reduces the loss over a short run", () => {
    const { losses } = trainLoop(200, 0, 3e-3, 50);
    expect(losses.length).toBe(4);
    expect(losses[losses.length - 1]).toBeLessThan(losses[0] * 0.8);
  }, 120_000);

  it("exports a container covering the census", () => {
    const census = loadCensus();
    const weights = initWeights(census, 1);
    const entries = decodeZth(exportWeights(weights, census));
    expect(entries.map((e) => e.name)).toEqual(Object.keys(census.weights));
  });
});
