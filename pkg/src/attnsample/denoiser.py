"""Denoiser contract plus two implementations.

``GMMDenoiser`` is the analytic oracle: exact epsilon predictions for a
Gaussian-mixture prior, no attention layers at all, so every attention
feature of the engine is silently inert when it runs.

``ToyDenoiser`` is a small deterministic transformer over a 16 x 16 x 3
latent grid (256 tokens): two blocks of self-attention (4 heads, head dim
8) with hook callouts, single-token cross-attention on a pose token, and
an MLP. The source image is channel-concatenated into the input. Weights
travel in the ZTH1 container.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .attention import AttentionMap, as_f32, attention_forward
from .diffusion import gmm_eps
from .errors import FormatError, ShapeError
from .tensorio import read_zth, write_zth

LATENT_SHAPE = (16, 16, 3)
EMBED_DIM = 32
HEADS = 4
HEAD_DIM = 8
BLOCKS = 2
MLP_HIDDEN = 128
CROSS_LAYER_BASE = 10
WEIGHT_FORMAT_VERSION = 1


@dataclass
class Condition:
    """Pose-and-source conditioning.

    pose holds (elevation delta, azimuth delta, radius delta); the
    identity condition has an all-zero pose and reproduces the source view.
    """

    pose: np.ndarray
    source_image: np.ndarray | None = None

    def __post_init__(self):
        self.pose = np.asarray(self.pose, dtype=np.float32).reshape(3)
        if self.source_image is not None:
            self.source_image = as_f32(self.source_image)

    @property
    def is_identity(self) -> bool:
        return bool(np.all(self.pose == 0.0))

    @classmethod
    def identity(cls, source_image: np.ndarray | None = None) -> "Condition":
        return cls(pose=np.zeros(3, dtype=np.float32), source_image=source_image)


class AttentionHooks:
    """Callbacks a denoiser fires at each self-attention layer.

    on_scores(layer_id, scores) -> scores: tap/filter the pre-softmax map.
    score_overrides: {layer_id: AttentionMap} used verbatim instead of the
    computed scores. on_kv(layer_id, k, v) -> (k, v): substitute or record
    keys/values before scores are computed. ``calls`` counts layer visits.
    """

    def __init__(self, on_scores=None, score_overrides=None, on_kv=None):
        self.on_scores = on_scores
        self.score_overrides = score_overrides or {}
        self.on_kv = on_kv
        self.calls = 0


@dataclass(frozen=True)
class LayerInfo:
    heads: int
    n_q: int
    n_k: int
    kind: str  # "self" | "cross"


class DenoiserInterface(abc.ABC):
    """Epsilon-prediction contract with attention tap/override hooks."""

    @abc.abstractmethod
    def predict_eps(
        self,
        z_t: np.ndarray,
        t: int,
        cond: Condition,
        hooks: AttentionHooks | None = None,
    ) -> np.ndarray:
        ...

    @abc.abstractmethod
    def attention_census(self) -> dict[int, LayerInfo]:
        ...


class GMMDenoiser(DenoiserInterface):
    """Closed-form epsilon oracle; empty attention census."""

    def __init__(self, schedule, prior, latent_shape=(1,)):
        self.schedule = schedule
        self.prior = prior
        self.latent_shape = tuple(latent_shape)
        if int(np.prod(self.latent_shape)) != prior.dim:
            raise ShapeError(
                f"latent shape {self.latent_shape} incompatible with prior dim "
                f"{prior.dim}"
            )

    def predict_eps(self, z_t, t, cond, hooks=None):
        z = np.asarray(z_t, dtype=np.float32)
        eps = gmm_eps(self.schedule, z.reshape(-1), t, self.prior)
        return eps.reshape(z.shape)

    def attention_census(self):
        return {}


# ---------------------------------------------------------------------------
# Weight container


def toy_weight_manifest() -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape map of every toy denoiser parameter."""
    d, hdim = EMBED_DIM, MLP_HIDDEN
    manifest: dict[str, tuple[int, ...]] = {
        "embed.w": (2 * LATENT_SHAPE[2], d),
        "embed.b": (d,),
        "time.w": (d, d),
        "time.b": (d,),
        "pose.w": (3, d),
        "pose.b": (d,),
    }
    for i in range(BLOCKS):
        p = f"block{i}."
        manifest[p + "ln1.g"] = (d,)
        manifest[p + "ln1.b"] = (d,)
        for name in ("wq", "wk", "wv", "wo"):
            manifest[p + "attn." + name] = (d, d)
        manifest[p + "ln2.g"] = (d,)
        manifest[p + "ln2.b"] = (d,)
        for name in ("wq", "wk", "wv", "wo"):
            manifest[p + "cross." + name] = (d, d)
        manifest[p + "ln3.g"] = (d,)
        manifest[p + "ln3.b"] = (d,)
        manifest[p + "mlp.w1"] = (d, hdim)
        manifest[p + "mlp.b1"] = (hdim,)
        manifest[p + "mlp.w2"] = (hdim, d)
        manifest[p + "mlp.b2"] = (d,)
    manifest["out_ln.g"] = (d,)
    manifest["out_ln.b"] = (d,)
    manifest["out.w"] = (d, LATENT_SHAPE[2])
    manifest["out.b"] = (LATENT_SHAPE[2],)
    return manifest


@dataclass
class WeightContainer:
    """Named f32 arrays plus a format version."""

    entries: dict[str, np.ndarray]
    version: int = WEIGHT_FORMAT_VERSION

    def check_census(self, manifest: dict[str, tuple[int, ...]]) -> None:
        missing = sorted(set(manifest) - set(self.entries))
        extra = sorted(set(self.entries) - set(manifest))
        if missing or extra:
            raise FormatError(
                f"weight census mismatch: missing={missing} extra={extra}"
            )
        for name, shape in manifest.items():
            got = self.entries[name].shape
            if got != shape:
                raise FormatError(f"{name}: shape {got} != expected {shape}")


def save_weights(container: WeightContainer, path) -> None:
    write_zth(path, container.entries)


def load_weights(path) -> WeightContainer:
    return WeightContainer(entries=read_zth(path))


def random_weights(seed: int) -> WeightContainer:
    """Seeded random initialization matching the architecture census."""
    gen = rngmod.stream(seed, "toy-init")
    entries: dict[str, np.ndarray] = {}
    for name, shape in toy_weight_manifest().items():
        if name.endswith(".g"):
            entries[name] = np.ones(shape, dtype=np.float32)
        elif name.endswith((".b", ".b1", ".b2")):
            entries[name] = np.zeros(shape, dtype=np.float32)
        else:
            entries[name] = (0.02 * gen.standard_normal(shape)).astype(np.float32)
    return WeightContainer(entries=entries)


# ---------------------------------------------------------------------------
# Toy attention denoiser


def sinusoidal_embedding(t: int, dim: int = EMBED_DIM) -> np.ndarray:
    half = dim // 2
    j = np.arange(half, dtype=np.float64)
    freqs = np.exp(-np.log(10000.0) * j / (half - 1))
    angles = t * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)]).astype(np.float32)


def layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + np.float32(1e-5)) * g + b


def _split_heads(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    return x.reshape(n, HEADS, HEAD_DIM).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    return x.transpose(1, 0, 2).reshape(-1, EMBED_DIM)


class ToyDenoiser(DenoiserInterface):
    """Deterministic 2-block attention denoiser over 16 x 16 x 3 latents."""

    def __init__(self, weights: WeightContainer):
        weights.check_census(toy_weight_manifest())
        self.w = {k: as_f32(v) for k, v in weights.entries.items()}

    @classmethod
    def randomized(cls, seed: int) -> "ToyDenoiser":
        return cls(random_weights(seed))

    @classmethod
    def from_file(cls, path) -> "ToyDenoiser":
        return cls(load_weights(path))

    def attention_census(self) -> dict[int, LayerInfo]:
        n_tok = LATENT_SHAPE[0] * LATENT_SHAPE[1]
        census = {}
        for i in range(BLOCKS):
            census[i] = LayerInfo(HEADS, n_tok, n_tok, "self")
            census[CROSS_LAYER_BASE + i] = LayerInfo(HEADS, n_tok, 1, "cross")
        return census

    def predict_eps(self, z_t, t, cond: Condition, hooks=None):
        z = as_f32(z_t)
        if z.shape != LATENT_SHAPE:
            raise ShapeError(f"latent shape {z.shape} != {LATENT_SHAPE}")
        if cond.source_image is None:
            raise ShapeError("toy denoiser requires a source image condition")
        src = cond.source_image
        if src.shape != LATENT_SHAPE:
            raise ShapeError(f"source image shape {src.shape} != {LATENT_SHAPE}")
        w = self.w
        n_tok = LATENT_SHAPE[0] * LATENT_SHAPE[1]

        x = np.concatenate([z, src], axis=-1).reshape(n_tok, 2 * LATENT_SHAPE[2])
        tokens = x @ w["embed.w"] + w["embed.b"]
        t_emb = sinusoidal_embedding(t) @ w["time.w"] + w["time.b"]
        tokens = tokens + t_emb
        pose_tok = cond.pose @ w["pose.w"] + w["pose.b"]

        for i in range(BLOCKS):
            p = f"block{i}."
            # Self-attention with hook callout.
            h1 = layer_norm(tokens, w[p + "ln1.g"], w[p + "ln1.b"])
            q = _split_heads(h1 @ w[p + "attn.wq"])
            k = _split_heads(h1 @ w[p + "attn.wk"])
            v = _split_heads(h1 @ w[p + "attn.wv"])
            override = None
            tap = None
            if hooks is not None:
                hooks.calls += 1
                if hooks.on_kv is not None:
                    k, v = hooks.on_kv(i, k, v)
                if i in hooks.score_overrides:
                    override = hooks.score_overrides[i]
                if hooks.on_scores is not None:
                    layer_id = i
                    tap = lambda s, layer_id=layer_id: hooks.on_scores(layer_id, s)
            attn = attention_forward(q, k, v, override=override, tap=tap)
            tokens = tokens + _merge_heads(attn) @ w[p + "attn.wo"]

            # Single-token cross-attention on the pose token. The softmax
            # over one key is identically 1, so this reduces to a learned
            # per-head value broadcast (a global bias).
            h2 = layer_norm(tokens, w[p + "ln2.g"], w[p + "ln2.b"])
            qc = _split_heads(h2 @ w[p + "cross.wq"])
            kc = _split_heads((pose_tok @ w[p + "cross.wk"])[None, :])
            vc = _split_heads((pose_tok @ w[p + "cross.wv"])[None, :])
            cross = attention_forward(qc, kc, vc)
            tokens = tokens + _merge_heads(cross) @ w[p + "cross.wo"]

            h3 = layer_norm(tokens, w[p + "ln3.g"], w[p + "ln3.b"])
            hidden = np.maximum(h3 @ w[p + "mlp.w1"] + w[p + "mlp.b1"], 0.0)
            tokens = tokens + hidden @ w[p + "mlp.w2"] + w[p + "mlp.b2"]

        out = layer_norm(tokens, w["out_ln.g"], w["out_ln.b"])
        out = out @ w["out.w"] + w["out.b"]
        return out.reshape(LATENT_SHAPE).astype(np.float32)
