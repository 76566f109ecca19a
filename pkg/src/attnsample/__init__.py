"""Test-time diffusion inference control over a pluggable denoiser."""

from .attention import AttentionMap, attention_forward, softmax_rows
from .denoiser import (
    AttentionHooks,
    Condition,
    DenoiserInterface,
    GMMDenoiser,
    ToyDenoiser,
    WeightContainer,
    load_weights,
    random_weights,
    save_weights,
    toy_weight_manifest,
)
from .diffusion import GMMPrior, NoiseSchedule, ddim_step, gmm_eps, q_sample, renoise
from .filtering import (
    AttentionHistory,
    FilterConfig,
    cross_step_blend,
    gt_map_capture,
    in_step_pool,
    msa_substitute,
    update_history,
)
from .metrics import iou_mask, psnr, seed_diversity, ssim
from .pipeline import (
    GenerationConfig,
    GenerationResult,
    NFECounter,
    generate,
    plain_ddim,
    seed_sweep,
)
from .schedule import TimestepSchedule, hourglass_schedule, uniform_schedule
from .tensorio import read_ppm, read_ztt, read_zth, write_ppm, write_ztt, write_zth

__all__ = [
    "AttentionHistory",
    "AttentionHooks",
    "AttentionMap",
    "Condition",
    "DenoiserInterface",
    "FilterConfig",
    "GMMDenoiser",
    "GMMPrior",
    "GenerationConfig",
    "GenerationResult",
    "NFECounter",
    "NoiseSchedule",
    "TimestepSchedule",
    "ToyDenoiser",
    "WeightContainer",
    "attention_forward",
    "cross_step_blend",
    "ddim_step",
    "generate",
    "gmm_eps",
    "gt_map_capture",
    "hourglass_schedule",
    "in_step_pool",
    "iou_mask",
    "load_weights",
    "msa_substitute",
    "plain_ddim",
    "psnr",
    "q_sample",
    "random_weights",
    "read_ppm",
    "read_ztt",
    "read_zth",
    "renoise",
    "save_weights",
    "seed_diversity",
    "seed_sweep",
    "softmax_rows",
    "ssim",
    "toy_weight_manifest",
    "uniform_schedule",
    "update_history",
    "write_ppm",
    "write_ztt",
    "write_zth",
]
