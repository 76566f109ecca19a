"""Generation orchestration: schedule walk, per-step resampling, dual-branch
mutual self-attention, filtering callbacks, NFE accounting, and seed
management.

Every stochastic draw comes from a dedicated counter-based stream keyed by
(seed, purpose, branch, timestep, iteration), so enabling or disabling any
feature leaves all other draws untouched. With every feature disabled the
run is bit-identical to a plain DDIM walk with the same seed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .attention import AttentionMap
from .denoiser import AttentionHooks, Condition, DenoiserInterface
from .diffusion import NoiseSchedule, ddim_step, renoise
from .errors import ConfigError
from .filtering import (
    AttentionHistory,
    FilterConfig,
    cross_step_blend,
    in_range,
    in_step_pool,
    msa_substitute,
    update_history,
)
from .schedule import TimestepSchedule
from .tensorio import write_ztt

BRANCH_MODES = ("single", "dual-msa")


@dataclass
class NFECounter:
    """Denoiser forward evaluations, tracked per branch."""

    per_branch: dict[str, int] = field(default_factory=dict)

    def increment(self, branch: str) -> None:
        self.per_branch[branch] = self.per_branch.get(branch, 0) + 1

    @property
    def total(self) -> int:
        return sum(self.per_branch.values())


@dataclass
class GenerationConfig:
    denoiser: DenoiserInterface
    timesteps: TimestepSchedule
    noise_schedule: NoiseSchedule
    filter: FilterConfig
    condition: Condition
    seed: int
    latent_shape: tuple[int, ...]
    branch_mode: str = "single"
    gt_maps: dict[int, AttentionMap] | None = None
    map_dump_dir: str | None = None

    def __post_init__(self):
        if self.branch_mode not in BRANCH_MODES:
            raise ConfigError(f"branch_mode must be one of {BRANCH_MODES}")
        if self.branch_mode == "dual-msa" and self.condition.source_image is None:
            raise ConfigError("dual-msa mode requires a source image condition")


@dataclass
class GenerationResult:
    sample: np.ndarray
    nfe: NFECounter
    diagnostics: dict


class _Branch:
    def __init__(self, name: str, index: int, cond: Condition, z0: np.ndarray):
        self.name = name
        self.index = index
        self.cond = cond
        self.z = z0
        self.z_next = z0
        self.history = AttentionHistory()
        self.pool_running: dict[int, AttentionMap] = {}
        self.refined_last: dict[int, AttentionMap] = {}
        self.captured_kv: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _build_hooks(
    cfg: GenerationConfig,
    branch: _Branch,
    source: _Branch | None,
    t: int,
    r: int,
) -> AttentionHooks:
    fc = cfg.filter
    pool_active = fc.pooling_enabled and in_range(t, fc.resample_range)
    hist_active = fc.history_enabled and in_range(t, fc.filter_range)
    is_target = source is not None or cfg.branch_mode == "single"
    dump_dir = cfg.map_dump_dir if is_target else None

    on_scores = None
    if pool_active or hist_active or dump_dir:

        def on_scores(layer_id: int, scores: np.ndarray) -> np.ndarray:
            refined = AttentionMap(scores, layer_id, t, r)
            if pool_active:
                refined = in_step_pool(
                    refined, branch.pool_running.get(layer_id), fc.pool, fc.pool_alpha
                )
            if hist_active:
                refined = cross_step_blend(refined, branch.history, fc.alpha_c)
            if pool_active:
                branch.pool_running[layer_id] = refined
            if pool_active or hist_active:
                branch.refined_last[layer_id] = refined
            if dump_dir:
                write_ztt(
                    Path(dump_dir) / f"layer{layer_id}_t{t}_r{r}.ztt",
                    refined.scores,
                )
            return refined.scores

    on_kv = None
    if cfg.branch_mode == "dual-msa":
        if source is None:
            # Source branch: record its keys/values for this iteration.
            def on_kv(layer_id, k, v):
                branch.captured_kv[layer_id] = (k, v)
                return k, v

        elif fc.msa_enabled:

            def on_kv(layer_id, k, v):
                src = source.captured_kv.get(layer_id, (None, None))
                return msa_substitute(k, v, src[0], src[1], t, layer_id, fc)

    overrides = None
    if cfg.gt_maps is not None and is_target:
        overrides = cfg.gt_maps
    return AttentionHooks(on_scores=on_scores, score_overrides=overrides, on_kv=on_kv)


def generate(cfg: GenerationConfig) -> GenerationResult:
    """Run one generation and return the final sample with diagnostics.

    Inside the resampling range each scheduled step performs an initial
    denoise followed by (R - 1) renoise-and-denoise iterations, where the
    renoise target is the previous *sampled* step. In dual-msa mode the
    identity-pose source branch runs in lockstep, one forward ahead of the
    target within each iteration, feeding its keys and values to the
    target's gated self-attention layers. The source branch is resampled
    and filtered identically.
    """
    fc = cfg.filter
    notes: list[str] = []
    if cfg.gt_maps is not None and cfg.branch_mode == "dual-msa":
        notes.append("gt-map injection combined with dual-msa")

    if cfg.branch_mode == "dual-msa":
        src_cond = Condition.identity(cfg.condition.source_image)
        branch_specs = [("source", 0, src_cond), ("target", 1, cfg.condition)]
    else:
        branch_specs = [("target", 0, cfg.condition)]

    branches = []
    for name, idx, cond in branch_specs:
        z0 = (
            rngmod.stream(cfg.seed, "init", idx)
            .standard_normal(cfg.latent_shape)
            .astype(np.float32)
        )
        branches.append(_Branch(name, idx, cond, z0))
    source = branches[0] if cfg.branch_mode == "dual-msa" else None

    nfe = NFECounter()
    per_step: list[dict] = []

    for t, t_prev in cfg.timesteps.walk():
        r_total = fc.iterations_at(t)
        for r in range(1, r_total + 1):
            for branch in branches:
                if r == 1:
                    z_t = branch.z
                else:
                    noise = (
                        rngmod.stream(cfg.seed, "renoise", branch.index, t, r)
                        .standard_normal(cfg.latent_shape)
                        .astype(np.float32)
                    )
                    z_t = renoise(cfg.noise_schedule, branch.z_next, t_prev, t, noise)
                hooks = _build_hooks(
                    cfg, branch, source if branch is not source else None, t, r
                )
                eps = cfg.denoiser.predict_eps(z_t, t, branch.cond, hooks)
                nfe.increment(branch.name)
                branch.z_next = ddim_step(cfg.noise_schedule, z_t, eps, t, t_prev)
                per_step.append(
                    {"branch": branch.name, "t": t, "r": r, "nfe": nfe.total}
                )
        for branch in branches:
            if (
                fc.history_enabled
                and in_range(t, fc.filter_range)
                and branch.refined_last
            ):
                is_first = not branch.history
                for refined in branch.refined_last.values():
                    update_history(
                        branch.history,
                        refined,
                        fc.alpha_h,
                        is_first,
                        expected_iterations=r_total,
                    )
            branch.z = branch.z_next
            branch.pool_running.clear()
            branch.refined_last.clear()
            branch.captured_kv.clear()

    target = branches[-1]
    diagnostics = {
        "steps": len(cfg.timesteps),
        "schedule": list(cfg.timesteps.steps),
        "nfe": dict(nfe.per_branch),
        "nfe_total": nfe.total,
        "nfe_target": nfe.per_branch.get("target", 0),
        "seed": cfg.seed,
        "branch_mode": cfg.branch_mode,
        "notes": notes,
        "per_step": per_step,
    }
    return GenerationResult(sample=target.z, nfe=nfe, diagnostics=diagnostics)


def plain_ddim(
    denoiser: DenoiserInterface,
    timesteps: TimestepSchedule,
    noise_schedule: NoiseSchedule,
    cond: Condition,
    seed: int,
    latent_shape: tuple[int, ...],
) -> np.ndarray:
    """Reference DDIM walk with no inference control, sharing the engine's
    initial-noise stream derivation."""
    z = (
        rngmod.stream(seed, "init", 0)
        .standard_normal(latent_shape)
        .astype(np.float32)
    )
    for t, t_prev in timesteps.walk():
        eps = denoiser.predict_eps(z, t, cond, None)
        z = ddim_step(noise_schedule, z, eps, t, t_prev)
    return z


def seed_sweep(cfg: GenerationConfig, n_seeds: int) -> list[GenerationResult]:
    """Independent generations differing only in seed.

    Index 0 reuses cfg.seed (so a sweep of one equals ``generate``); later
    indices use a splitmix-derived per-index seed.
    """
    if n_seeds < 1:
        raise ConfigError("n_seeds must be >= 1")
    results = []
    for i in range(n_seeds):
        seed = cfg.seed if i == 0 else rngmod.derive_seed(cfg.seed, i)
        results.append(generate(dataclasses.replace(cfg, seed=seed)))
    return results
