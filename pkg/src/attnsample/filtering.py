"""Pre-softmax attention-map control: in-step pooling across resampling
iterations, cross-step history blending, history updates, mutual
self-attention key/value substitution, and reference-map capture.

Everything here operates on raw (pre-softmax) score tensors; softmax is
applied afterwards by the attention primitive, so row-stochasticity of the
post-softmax maps is preserved by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .attention import AttentionMap, as_f32
from .diffusion import NoiseSchedule, q_sample
from .errors import ContractError, ShapeError

POOL_KINDS = ("min", "mean", "ema")


def in_range(t: int, bounds: tuple[int, int]) -> bool:
    """Half-open membership t in (lo, hi]."""
    lo, hi = bounds
    return lo < t <= hi


@dataclass(frozen=True)
class FilterConfig:
    """All inference-control knobs.

    Ranges are half-open ``(lo, hi]`` intervals of raw timesteps. The
    defaults reproduce the reference operating point: 5 resampling
    iterations over (800, 1000], min-pooling, history blending over
    (600, 1000] with blend weight 0.2 and decay 0.5, and MSA gated to
    (600, 1000].
    """

    resample_iterations: int = 5
    resample_range: tuple[int, int] = (800, 1000)
    filter_range: tuple[int, int] = (600, 1000)
    pool: str = "min"
    pool_alpha: float = 0.5
    alpha_c: float = 0.2
    alpha_h: float = 0.5
    msa_range: tuple[int, int] = (600, 1000)
    msa_layers: frozenset[int] = frozenset()
    resample_enabled: bool = True
    pooling_enabled: bool = True
    history_enabled: bool = True
    msa_enabled: bool = False

    def __post_init__(self):
        if self.resample_iterations < 1:
            raise ValueError("resample_iterations must be >= 1")
        if self.pool not in POOL_KINDS:
            raise ValueError(f"pool must be one of {POOL_KINDS}")
        for name in ("pool_alpha", "alpha_c", "alpha_h"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("resample_range", "filter_range", "msa_range"):
            lo, hi = getattr(self, name)
            if not 0 <= lo < hi:
                raise ValueError(f"{name} must be a (lo, hi] interval with lo < hi")
        object.__setattr__(self, "msa_layers", frozenset(self.msa_layers))

    @classmethod
    def disabled(cls) -> "FilterConfig":
        """Everything off: plain DDIM behavior."""
        return cls(
            resample_iterations=1,
            alpha_c=1.0,
            resample_enabled=False,
            pooling_enabled=False,
            history_enabled=False,
            msa_enabled=False,
        )

    def iterations_at(self, t: int) -> int:
        if self.resample_enabled and in_range(t, self.resample_range):
            return self.resample_iterations
        return 1


@dataclass
class AttentionHistory:
    """Per-layer EMA of refined maps carried across timesteps.

    Each entry keeps the full (heads, n_q, n_k) block for its layer, one
    slice per head.
    """

    maps: dict[int, np.ndarray] = field(default_factory=dict)
    last_update_timestep: int | None = None

    def get(self, layer_id: int) -> np.ndarray | None:
        return self.maps.get(layer_id)

    def __bool__(self) -> bool:
        return bool(self.maps)


def in_step_pool(
    current: AttentionMap,
    running: AttentionMap | None,
    pool: str,
    pool_alpha: float = 0.5,
) -> AttentionMap:
    """Aggregate the current raw map with the running refined aggregate.

    min: elementwise minimum. mean: running mean over the r maps seen so
    far (the count is current.resample_index). ema: pool_alpha * current +
    (1 - pool_alpha) * running. With no running map (r = 1) the current map
    passes through.
    """
    if pool not in POOL_KINDS:
        raise ValueError(f"pool must be one of {POOL_KINDS}")
    if running is None:
        return current
    if running.scores.shape != current.scores.shape:
        raise ShapeError(
            f"running shape {running.scores.shape} != current {current.scores.shape}"
        )
    r = current.resample_index
    if pool == "min":
        pooled = np.minimum(current.scores, running.scores)
    elif pool == "mean":
        pooled = (current.scores + np.float32(r - 1) * running.scores) / np.float32(r)
    else:
        a = np.float32(pool_alpha)
        pooled = a * current.scores + (np.float32(1.0) - a) * running.scores
    return replace(current, scores=pooled)


def cross_step_blend(
    pooled: AttentionMap, history: AttentionHistory, alpha_c: float
) -> AttentionMap:
    """alpha_c * pooled + (1 - alpha_c) * stored history for this layer.

    Pass-through when the history holds no entry for the layer, so partial
    activation (pooling active outside the history range) stays well
    defined.
    """
    stored = history.get(pooled.layer_id)
    if stored is None:
        return pooled
    if stored.shape != pooled.scores.shape:
        raise ShapeError(
            f"history shape {stored.shape} != map shape {pooled.scores.shape}"
        )
    a = np.float32(alpha_c)
    return replace(pooled, scores=a * pooled.scores + (np.float32(1.0) - a) * stored)


def update_history(
    history: AttentionHistory,
    final_map: AttentionMap,
    alpha_h: float,
    is_first_filtered_step: bool,
    expected_iterations: int | None = None,
) -> AttentionHistory:
    """Fold the last refined map of a timestep into the history.

    On the first filtered step the history is seeded with the map itself;
    afterwards it decays with weight alpha_h. ``expected_iterations``
    guards against being called with a non-final resampling iteration.
    """
    if (
        expected_iterations is not None
        and final_map.resample_index != expected_iterations
    ):
        raise ContractError(
            f"history update requires the refined map of the final iteration "
            f"(r={expected_iterations}), got r={final_map.resample_index}"
        )
    stored = history.get(final_map.layer_id)
    if is_first_filtered_step or stored is None:
        history.maps[final_map.layer_id] = final_map.scores.copy()
    else:
        a = np.float32(alpha_h)
        history.maps[final_map.layer_id] = (
            a * final_map.scores + (np.float32(1.0) - a) * stored
        )
    history.last_update_timestep = final_map.timestep
    return history


def msa_substitute(
    k_tgt: np.ndarray,
    v_tgt: np.ndarray,
    k_src: np.ndarray | None,
    v_src: np.ndarray | None,
    t: int,
    layer_id: int,
    cfg: FilterConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Return the source branch keys/values when MSA is gated on for this
    (timestep, layer); the target's own otherwise.

    The gate is active from the top of the denoising process down to the
    range's lower bound, and only for layers in cfg.msa_layers.
    """
    if not (
        cfg.msa_enabled
        and in_range(t, cfg.msa_range)
        and layer_id in cfg.msa_layers
    ):
        return k_tgt, v_tgt
    if k_src is None or v_src is None:
        raise ContractError(
            f"MSA enabled for layer {layer_id} at t={t} but no source k/v present"
        )
    return as_f32(k_src), as_f32(v_src)


def gt_map_capture(
    denoiser,
    schedule: NoiseSchedule,
    target_clean: np.ndarray,
    cond,
    rng: np.random.Generator,
    tau_init: int = 5,
) -> dict[int, AttentionMap]:
    """Record every self-attention layer's pre-softmax map from one forward
    pass on a lightly noised encoding of the clean target.
    """
    from .denoiser import AttentionHooks  # local import: avoid cycle

    noise = rng.standard_normal(target_clean.shape).astype(np.float32)
    z = q_sample(schedule, target_clean, tau_init, noise)
    captured: dict[int, AttentionMap] = {}

    def record(layer_id: int, scores: np.ndarray) -> np.ndarray:
        captured[layer_id] = AttentionMap(
            scores=scores.copy(), layer_id=layer_id, timestep=tau_init
        )
        return scores

    hooks = AttentionHooks(on_scores=record)
    denoiser.predict_eps(z, tau_init, cond, hooks)
    if not captured and denoiser.attention_census():
        raise ContractError("denoiser exposes attention layers but no taps fired")
    return captured
