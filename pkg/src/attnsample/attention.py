"""Scaled dot-product attention with tap/override hook points.

All tensors are dense row-major float32 numpy arrays. Attention score
matrices are always handled *pre-softmax*: that is the surface every
filtering mechanism in this package operates on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError


def as_f32(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float32)


def check_finite(name: str, x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"{name} contains non-finite values")


@dataclass
class AttentionMap:
    """Pre-softmax score tensor of one self-attention layer.

    ``scores`` has shape (heads, n_queries, n_keys). The triple
    (layer_id, timestep, resample_index) identifies the map within one
    generation; resample_index counts from 1.
    """

    scores: np.ndarray
    layer_id: int
    timestep: int
    resample_index: int = 1

    def __post_init__(self):
        self.scores = as_f32(self.scores)
        if self.scores.ndim != 3:
            raise ShapeError(
                f"attention scores must be (heads, n_q, n_k), got {self.scores.shape}"
            )
        if self.resample_index < 1:
            raise ValueError("resample_index counts from 1")


def softmax_rows(s: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis.

    Accumulates in float64 and returns float32; rows sum to 1 within 1e-6.
    """
    s = np.asarray(s)
    check_finite("softmax input", s)
    shifted = s.astype(np.float64) - s.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return (e / e.sum(axis=-1, keepdims=True)).astype(np.float32)


def attention_forward(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    override: AttentionMap | None = None,
    tap=None,
) -> np.ndarray:
    """softmax(q kᵀ / √d) · v with two hook points.

    ``tap``, if given, receives the computed pre-softmax scores
    (heads, n_q, n_k) and returns a possibly-filtered replacement.
    ``override``, if given, wins over both: its scores are used verbatim.

    With a single key (n_k == 1) the post-softmax map is all ones
    regardless of the scores, so the output is the value row broadcast to
    every query.
    """
    q, k, v = as_f32(q), as_f32(k), as_f32(v)
    if q.ndim != 3 or k.ndim != 3 or v.ndim != 3:
        raise ShapeError("q, k, v must be rank-3 (heads, tokens, dim)")
    h, n_q, d = q.shape
    if d <= 0:
        raise ShapeError("head dimension must be positive")
    if k.shape[0] != h or v.shape[0] != h:
        raise ShapeError("head counts disagree across q/k/v")
    if k.shape[2] != d:
        raise ShapeError(f"key dim {k.shape[2]} != query dim {d}")
    if v.shape[1] != k.shape[1]:
        raise ShapeError("k and v must agree on the number of keys")
    for name, x in (("q", q), ("k", k), ("v", v)):
        check_finite(name, x)

    scores = np.einsum("hqd,hkd->hqk", q, k).astype(np.float32) / np.float32(
        np.sqrt(d)
    )
    if tap is not None:
        scores = as_f32(tap(scores))
    if override is not None:
        if override.scores.shape != (h, n_q, k.shape[1]):
            raise ShapeError(
                f"override shape {override.scores.shape} != {(h, n_q, k.shape[1])}"
            )
        scores = override.scores
    probs = softmax_rows(scores)
    return np.einsum("hqk,hkd->hqd", probs, v).astype(np.float32)
