"""Shared interop manifests.

The weight trainer lives in a separate codebase and must agree with this
package on two things: the forward-process constants and the architecture
census (weight names and shapes). Both are serialized as JSON files under
``shared/`` in the repository root; the functions here are the single
source of truth for their content.
"""

from __future__ import annotations

import json
from pathlib import Path

from .denoiser import (
    BLOCKS,
    EMBED_DIM,
    HEAD_DIM,
    HEADS,
    LATENT_SHAPE,
    MLP_HIDDEN,
    WEIGHT_FORMAT_VERSION,
    toy_weight_manifest,
)
from .diffusion import DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_T


def constants_dict() -> dict:
    return {
        "T": DEFAULT_T,
        "beta_schedule": "scaled_linear",
        "beta_start": DEFAULT_BETA_START,
        "beta_end": DEFAULT_BETA_END,
    }


def census_dict() -> dict:
    return {
        "format": "ZTH1",
        "version": WEIGHT_FORMAT_VERSION,
        "latent_shape": list(LATENT_SHAPE),
        "embed_dim": EMBED_DIM,
        "heads": HEADS,
        "head_dim": HEAD_DIM,
        "blocks": BLOCKS,
        "mlp_hidden": MLP_HIDDEN,
        "weights": {name: list(shape) for name, shape in toy_weight_manifest().items()},
    }


def write_shared(directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "constants.json").write_text(
        json.dumps(constants_dict(), indent=2) + "\n"
    )
    (directory / "census.json").write_text(
        json.dumps(census_dict(), indent=2) + "\n"
    )
