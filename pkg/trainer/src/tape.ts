/**
 * Minimal reverse-mode autodiff over dense float64 tensors.
 *
 * Only the operations the denoiser forward pass needs are implemented:
 * matmul, batched attention products, layer norm, row softmax, relu,
 * residual add, bias broadcast, head split/merge, and MSE loss. Gradients
 * accumulate into `grad` buffers; `Tape.backward` replays the recorded
 * operations in reverse.
 */

export class Tensor {
  data: Float64Array;
  shape: number[];
  grad: Float64Array | null;

  constructor(data: Float64Array, shape: number[], requiresGrad = false) {
    if (data.length !== shape.reduce((a, b) => a * b, 1)) {
      throw new Error(`data length ${data.length} != shape ${shape}`);
    }
    this.data = data;
    this.shape = shape;
    this.grad = requiresGrad ? new Float64Array(data.length) : null;
  }

  static zeros(shape: number[], requiresGrad = false): Tensor {
    const n = shape.reduce((a, b) => a * b, 1);
    return new Tensor(new Float64Array(n), shape, requiresGrad);
  }

  static from(values: number[] | Float32Array | Float64Array, shape: number[]): Tensor {
    return new Tensor(Float64Array.from(values), shape);
  }

  get size(): number {
    return this.data.length;
  }
}

type BackwardFn = () => void;

export class Tape {
  private ops: BackwardFn[] = [];

  private record(out: Tensor, backward: BackwardFn): Tensor {
    if (out.grad === null) out.grad = new Float64Array(out.size);
    this.ops.push(backward);
    return out;
  }

  /** Elementwise sum of two same-shape tensors. */
  add(a: Tensor, b: Tensor): Tensor {
    const out = Tensor.zeros(a.shape);
    for (let i = 0; i < a.size; i++) out.data[i] = a.data[i] + b.data[i];
    return this.record(out, () => {
      for (let i = 0; i < a.size; i++) {
        if (a.grad) a.grad[i] += out.grad![i];
        if (b.grad) b.grad[i] += out.grad![i];
      }
    });
  }

  /** x: [n, d] plus a broadcast row bias b: [d]. */
  addBias(x: Tensor, b: Tensor): Tensor {
    const [n, d] = x.shape;
    const out = Tensor.zeros([n, d]);
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < d; j++) out.data[i * d + j] = x.data[i * d + j] + b.data[j];
    }
    return this.record(out, () => {
      for (let i = 0; i < n; i++) {
        for (let j = 0; j < d; j++) {
          if (x.grad) x.grad[i * d + j] += out.grad![i * d + j];
          if (b.grad) b.grad[j] += out.grad![i * d + j];
        }
      }
    });
  }

  /** [n, k] x [k, m] -> [n, m]. */
  matmul(a: Tensor, b: Tensor): Tensor {
    const [n, k] = a.shape;
    const m = b.shape[1];
    const out = Tensor.zeros([n, m]);
    for (let i = 0; i < n; i++) {
      for (let p = 0; p < k; p++) {
        const av = a.data[i * k + p];
        for (let j = 0; j < m; j++) out.data[i * m + j] += av * b.data[p * m + j];
      }
    }
    return this.record(out, () => {
      for (let i = 0; i < n; i++) {
        for (let p = 0; p < k; p++) {
          let accA = 0;
          const av = a.data[i * k + p];
          for (let j = 0; j < m; j++) {
            const g = out.grad![i * m + j];
            accA += g * b.data[p * m + j];
            if (b.grad) b.grad[p * m + j] += g * av;
          }
          if (a.grad) a.grad[i * k + p] += accA;
        }
      }
    });
  }

  /** a: [h, n, d], b: [h, m, d] -> scores a b^T: [h, n, m]. */
  bmmNT(a: Tensor, b: Tensor): Tensor {
    const [h, n, d] = a.shape;
    const m = b.shape[1];
    const out = Tensor.zeros([h, n, m]);
    for (let hi = 0; hi < h; hi++) {
      const ao = hi * n * d;
      const bo = hi * m * d;
      const oo = hi * n * m;
      for (let i = 0; i < n; i++) {
        for (let j = 0; j < m; j++) {
          let s = 0;
          for (let p = 0; p < d; p++) s += a.data[ao + i * d + p] * b.data[bo + j * d + p];
          out.data[oo + i * m + j] = s;
        }
      }
    }
    return this.record(out, () => {
      for (let hi = 0; hi < h; hi++) {
        const ao = hi * n * d;
        const bo = hi * m * d;
        const oo = hi * n * m;
        for (let i = 0; i < n; i++) {
          for (let j = 0; j < m; j++) {
            const g = out.grad![oo + i * m + j];
            for (let p = 0; p < d; p++) {
              if (a.grad) a.grad[ao + i * d + p] += g * b.data[bo + j * d + p];
              if (b.grad) b.grad[bo + j * d + p] += g * a.data[ao + i * d + p];
            }
          }
        }
      }
    });
  }

  /** a: [h, n, m], b: [h, m, d] -> [h, n, d]. */
  bmm(a: Tensor, b: Tensor): Tensor {
    const [h, n, m] = a.shape;
    const d = b.shape[2];
    const out = Tensor.zeros([h, n, d]);
    for (let hi = 0; hi < h; hi++) {
      const ao = hi * n * m;
      const bo = hi * m * d;
      const oo = hi * n * d;
      for (let i = 0; i < n; i++) {
        for (let j = 0; j < m; j++) {
          const av = a.data[ao + i * m + j];
          for (let p = 0; p < d; p++) out.data[oo + i * d + p] += av * b.data[bo + j * d + p];
        }
      }
    }
    return this.record(out, () => {
      for (let hi = 0; hi < h; hi++) {
        const ao = hi * n * m;
        const bo = hi * m * d;
        const oo = hi * n * d;
        for (let i = 0; i < n; i++) {
          for (let j = 0; j < m; j++) {
            let accA = 0;
            const av = a.data[ao + i * m + j];
            for (let p = 0; p < d; p++) {
              const g = out.grad![oo + i * d + p];
              accA += g * b.data[bo + j * d + p];
              if (b.grad) b.grad[bo + j * d + p] += g * av;
            }
            if (a.grad) a.grad[ao + i * m + j] += accA;
          }
        }
      }
    });
  }

  scale(x: Tensor, s: number): Tensor {
    const out = Tensor.zeros(x.shape);
    for (let i = 0; i < x.size; i++) out.data[i] = x.data[i] * s;
    return this.record(out, () => {
      if (!x.grad) return;
      for (let i = 0; i < x.size; i++) x.grad[i] += out.grad![i] * s;
    });
  }

  relu(x: Tensor): Tensor {
    const out = Tensor.zeros(x.shape);
    for (let i = 0; i < x.size; i++) out.data[i] = Math.max(x.data[i], 0);
    return this.record(out, () => {
      if (!x.grad) return;
      for (let i = 0; i < x.size; i++) if (x.data[i] > 0) x.grad[i] += out.grad![i];
    });
  }

  /** Row-wise layer norm over the last axis with gain g and bias b. */
  layerNorm(x: Tensor, g: Tensor, b: Tensor, eps = 1e-5): Tensor {
    const d = x.shape[x.shape.length - 1];
    const rows = x.size / d;
    const out = Tensor.zeros(x.shape);
    const mus = new Float64Array(rows);
    const istds = new Float64Array(rows);
    for (let r = 0; r < rows; r++) {
      let mu = 0;
      for (let j = 0; j < d; j++) mu += x.data[r * d + j];
      mu /= d;
      let v = 0;
      for (let j = 0; j < d; j++) {
        const c = x.data[r * d + j] - mu;
        v += c * c;
      }
      v /= d;
      const istd = 1 / Math.sqrt(v + eps);
      mus[r] = mu;
      istds[r] = istd;
      for (let j = 0; j < d; j++) {
        out.data[r * d + j] = (x.data[r * d + j] - mu) * istd * g.data[j] + b.data[j];
      }
    }
    return this.record(out, () => {
      for (let r = 0; r < rows; r++) {
        const mu = mus[r];
        const istd = istds[r];
        // dL/dxhat, then the standard layer-norm input gradient.
        let sumDx = 0;
        let sumDxXhat = 0;
        const dxhat = new Float64Array(d);
        for (let j = 0; j < d; j++) {
          const go = out.grad![r * d + j];
          const xhat = (x.data[r * d + j] - mu) * istd;
          if (g.grad) g.grad[j] += go * xhat;
          if (b.grad) b.grad[j] += go;
          dxhat[j] = go * g.data[j];
          sumDx += dxhat[j];
          sumDxXhat += dxhat[j] * xhat;
        }
        if (x.grad) {
          for (let j = 0; j < d; j++) {
            const xhat = (x.data[r * d + j] - mu) * istd;
            x.grad[r * d + j] +=
              (istd / d) * (d * dxhat[j] - sumDx - xhat * sumDxXhat);
          }
        }
      }
    });
  }

  /** Softmax over the last axis. */
  softmaxRows(x: Tensor): Tensor {
    const m = x.shape[x.shape.length - 1];
    const rows = x.size / m;
    const out = Tensor.zeros(x.shape);
    for (let r = 0; r < rows; r++) {
      let max = -Infinity;
      for (let j = 0; j < m; j++) max = Math.max(max, x.data[r * m + j]);
      let sum = 0;
      for (let j = 0; j < m; j++) {
        const e = Math.exp(x.data[r * m + j] - max);
        out.data[r * m + j] = e;
        sum += e;
      }
      for (let j = 0; j < m; j++) out.data[r * m + j] /= sum;
    }
    return this.record(out, () => {
      if (!x.grad) return;
      for (let r = 0; r < rows; r++) {
        let dot = 0;
        for (let j = 0; j < m; j++) dot += out.grad![r * m + j] * out.data[r * m + j];
        for (let j = 0; j < m; j++) {
          x.grad[r * m + j] += out.data[r * m + j] * (out.grad![r * m + j] - dot);
        }
      }
    });
  }

  /** [n, heads * hd] -> [heads, n, hd]. */
  splitHeads(x: Tensor, heads: number): Tensor {
    const [n, d] = x.shape;
    const hd = d / heads;
    const out = Tensor.zeros([heads, n, hd]);
    for (let i = 0; i < n; i++) {
      for (let h = 0; h < heads; h++) {
        for (let p = 0; p < hd; p++) {
          out.data[(h * n + i) * hd + p] = x.data[i * d + h * hd + p];
        }
      }
    }
    return this.record(out, () => {
      if (!x.grad) return;
      for (let i = 0; i < n; i++) {
        for (let h = 0; h < heads; h++) {
          for (let p = 0; p < hd; p++) {
            x.grad[i * d + h * hd + p] += out.grad![(h * n + i) * hd + p];
          }
        }
      }
    });
  }

  /** [heads, n, hd] -> [n, heads * hd]. */
  mergeHeads(x: Tensor): Tensor {
    const [heads, n, hd] = x.shape;
    const d = heads * hd;
    const out = Tensor.zeros([n, d]);
    for (let h = 0; h < heads; h++) {
      for (let i = 0; i < n; i++) {
        for (let p = 0; p < hd; p++) {
          out.data[i * d + h * hd + p] = x.data[(h * n + i) * hd + p];
        }
      }
    }
    return this.record(out, () => {
      if (!x.grad) return;
      for (let h = 0; h < heads; h++) {
        for (let i = 0; i < n; i++) {
          for (let p = 0; p < hd; p++) {
            x.grad[(h * n + i) * hd + p] += out.grad![i * d + h * hd + p];
          }
        }
      }
    });
  }

  /** Gradient-passthrough view with a new shape. */
  reshape(x: Tensor, shape: number[]): Tensor {
    const out = new Tensor(Float64Array.from(x.data), shape);
    return this.record(out, () => {
      if (!x.grad) return;
      for (let i = 0; i < x.size; i++) x.grad[i] += out.grad![i];
    });
  }

  /** Mean squared error against a constant target; returns a scalar tensor. */
  mseLoss(pred: Tensor, target: Float64Array): Tensor {
    const out = Tensor.zeros([1]);
    let s = 0;
    for (let i = 0; i < pred.size; i++) {
      const d = pred.data[i] - target[i];
      s += d * d;
    }
    out.data[0] = s / pred.size;
    return this.record(out, () => {
      if (!pred.grad) return;
      const c = (2 / pred.size) * out.grad![0];
      for (let i = 0; i < pred.size; i++) {
        pred.grad[i] += c * (pred.data[i] - target[i]);
      }
    });
  }

  backward(loss: Tensor): void {
    loss.grad![0] = 1;
    for (let i = this.ops.length - 1; i >= 0; i--) this.ops[i]();
    this.ops = [];
  }
}
