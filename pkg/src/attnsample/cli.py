"""Operator surface: run generations, ablations, and diagnostics from flat
key=value config files.

Exit codes: 0 ok, 2 config error, 3 I/O error, 4 numeric error. The
``Z2H_THREADS`` environment variable caps seed-level parallelism.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .denoiser import Condition, GMMDenoiser, ToyDenoiser
from .diffusion import GMMPrior, NoiseSchedule
from .errors import ConfigError, FormatError, NumericError
from .filtering import FilterConfig, gt_map_capture
from .metrics import iou_mask, psnr, seed_diversity, ssim
from .pipeline import GenerationConfig, GenerationResult, generate
from .schedule import hourglass_schedule, uniform_schedule
from .tensorio import read_ppm, write_ppm, write_ztt

# Every key has a default equal to the reference operating point.
DEFAULTS: dict[str, str] = {
    "denoiser": "gmm",  # gmm | toy
    "weights": "",  # ZTH1 path; empty -> seeded random weights
    "weight_seed": "0",
    "latent": "16x16x3",
    "schedule": "hourglass",  # hourglass | uniform
    "steps": "25",  # uniform step count
    "T": "1000",
    "seed": "0",
    "n_seeds": "1",
    "pose": "0.0,1.5707963,0.0",
    "source": "",  # source-view PPM for the toy denoiser
    "resample": "on",
    "resample_r": "5",
    "resample_lo": "800",
    "resample_hi": "1000",
    "amf": "on",
    "pool": "min",
    "pool_alpha": "0.5",
    "filter_lo": "600",
    "filter_hi": "1000",
    "alpha_c": "0.2",
    "alpha_h": "0.5",
    "msa": "on",
    "msa_lo": "600",
    "msa_hi": "1000",
    "msa_layers": "0,1",
    "gt_tau_init": "5",
    "out": "out",
}

PRESETS: dict[str, dict[str, str]] = {
    "default": {},
    "baseline-25": {
        "schedule": "uniform",
        "steps": "25",
        "resample": "off",
        "amf": "off",
        "msa": "off",
    },
}

# Toggle grid of the six ablation rows: (hourglass, resample, amf, msa).
ABLATION_ROWS = [
    (False, False, False, False),
    (True, False, False, False),
    (True, True, False, False),
    (True, True, True, False),
    (True, True, False, True),
    (True, True, True, True),
]


class RunConfig:
    """Flat key=value configuration with defaults and strict key checking."""

    def __init__(self, values: dict[str, str] | None = None):
        self.values = dict(DEFAULTS)
        for k, v in (values or {}).items():
            self.set(k, v)

    def set(self, key: str, value: str) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        self.values[key] = str(value)

    def __getitem__(self, key: str) -> str:
        return self.values[key]

    def get_int(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError as e:
            raise ConfigError(f"{key} must be an integer: {e}") from e

    def get_float(self, key: str) -> float:
        try:
            return float(self.values[key])
        except ValueError as e:
            raise ConfigError(f"{key} must be a number: {e}") from e

    def get_bool(self, key: str) -> bool:
        v = self.values[key].lower()
        if v in ("on", "true", "1", "yes"):
            return True
        if v in ("off", "false", "0", "no"):
            return False
        raise ConfigError(f"{key} must be on/off, got {self.values[key]!r}")

    @classmethod
    def load(cls, path=None, preset: str = "default", overrides=None) -> "RunConfig":
        cfg = cls()
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        for k, v in PRESETS[preset].items():
            cfg.set(k, v)
        if path:
            for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, value = (part.strip() for part in line.split("=", 1))
                cfg.set(key, value)
        for item in overrides or []:
            if "=" not in item:
                raise ConfigError(f"--set needs key=value, got {item!r}")
            key, value = (part.strip() for part in item.split("=", 1))
            cfg.set(key, value)
        return cfg


def _parse_latent(spec: str) -> tuple[int, ...]:
    try:
        shape = tuple(int(x) for x in spec.lower().split("x"))
    except ValueError as e:
        raise ConfigError(f"bad latent spec {spec!r}") from e
    if not shape or any(d < 1 for d in shape):
        raise ConfigError(f"bad latent spec {spec!r}")
    return shape


def _build_timesteps(cfg: RunConfig):
    T = cfg.get_int("T")
    if cfg["schedule"] == "hourglass":
        return hourglass_schedule(T)
    if cfg["schedule"] == "uniform":
        return uniform_schedule(T, cfg.get_int("steps"))
    raise ConfigError(f"unknown schedule kind {cfg['schedule']!r}")


def _build_filter(cfg: RunConfig) -> FilterConfig:
    amf = cfg.get_bool("amf")
    return FilterConfig(
        resample_iterations=cfg.get_int("resample_r"),
        resample_range=(cfg.get_int("resample_lo"), cfg.get_int("resample_hi")),
        filter_range=(cfg.get_int("filter_lo"), cfg.get_int("filter_hi")),
        pool=cfg["pool"],
        pool_alpha=cfg.get_float("pool_alpha"),
        alpha_c=cfg.get_float("alpha_c") if amf else 1.0,
        alpha_h=cfg.get_float("alpha_h"),
        msa_range=(cfg.get_int("msa_lo"), cfg.get_int("msa_hi")),
        msa_layers=frozenset(
            int(x) for x in cfg["msa_layers"].split(",") if x.strip()
        ),
        resample_enabled=cfg.get_bool("resample"),
        pooling_enabled=amf,
        history_enabled=amf,
        msa_enabled=cfg.get_bool("msa"),
    )


def _build_generation(
    cfg: RunConfig, source_image: np.ndarray | None = None
) -> tuple[GenerationConfig, list[str]]:
    notes: list[str] = []
    noise_schedule = NoiseSchedule.scaled_linear(T=cfg.get_int("T"))
    latent = _parse_latent(cfg["latent"])
    pose = np.array([float(x) for x in cfg["pose"].split(",")], dtype=np.float32)
    if pose.shape != (3,):
        raise ConfigError("pose must have three comma-separated components")

    if cfg["denoiser"] == "gmm":
        dim = int(np.prod(latent))
        prior = GMMPrior(
            weights=[1.0], means=np.zeros((1, dim)), variances=np.ones((1, dim))
        )
        denoiser = GMMDenoiser(noise_schedule, prior, latent_shape=latent)
    elif cfg["denoiser"] == "toy":
        if cfg["weights"]:
            denoiser = ToyDenoiser.from_file(cfg["weights"])
        else:
            denoiser = ToyDenoiser.randomized(cfg.get_int("weight_seed"))
            notes.append("toy denoiser running with seeded random weights")
    else:
        raise ConfigError(f"unknown denoiser {cfg['denoiser']!r}")

    if source_image is None and cfg["source"]:
        source_image = read_ppm(cfg["source"])
    cond = Condition(pose=pose, source_image=source_image)

    fc = _build_filter(cfg)
    branch_mode = "single"
    if fc.msa_enabled:
        if denoiser.attention_census() and source_image is not None:
            branch_mode = "dual-msa"
        else:
            fc = dataclasses.replace(fc, msa_enabled=False)
            notes.append("msa requested but inert for this denoiser; running single branch")

    gen = GenerationConfig(
        denoiser=denoiser,
        timesteps=_build_timesteps(cfg),
        noise_schedule=noise_schedule,
        filter=fc,
        condition=cond,
        seed=cfg.get_int("seed"),
        latent_shape=latent,
        branch_mode=branch_mode,
    )
    return gen, notes


def _run_seeds(gen: GenerationConfig, n_seeds: int) -> list[GenerationResult]:
    """Seed sweep honoring the Z2H_THREADS parallelism cap."""
    seeds = [
        gen.seed if i == 0 else rngmod.derive_seed(gen.seed, i)
        for i in range(n_seeds)
    ]
    threads = int(os.environ.get("Z2H_THREADS", "1"))
    configs = [dataclasses.replace(gen, seed=s) for s in seeds]
    if threads <= 1 or n_seeds == 1:
        return [generate(c) for c in configs]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(generate, configs))


def _write_manifest(cfg: RunConfig, out_dir: Path, command: str, extra=None) -> None:
    manifest = {"command": command, "config": dict(cfg.values)}
    manifest.update(extra or {})
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _is_image(sample: np.ndarray) -> bool:
    return sample.ndim == 3 and sample.shape[2] == 3


def cmd_sample(args) -> int:
    cfg = RunConfig.load(args.config, args.preset, args.set)
    out_dir = Path(args.out or cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    gen, notes = _build_generation(cfg)
    if args.dump_maps:
        maps_dir = out_dir / "maps"
        maps_dir.mkdir(exist_ok=True)
        gen.map_dump_dir = str(maps_dir)
    results = _run_seeds(gen, cfg.get_int("n_seeds"))
    for i, res in enumerate(results):
        if _is_image(res.sample):
            write_ppm(out_dir / f"sample_{i}.ppm", res.sample)
        if args.dump_tensor:
            write_ztt(out_dir / f"latent_{i}.ztt", res.sample)
    diag = {
        "nfe": results[0].nfe.per_branch["target"],
        "nfe_total": results[0].nfe.total,
        "steps": results[0].diagnostics["steps"],
        "schedule": results[0].diagnostics["schedule"],
        "branch_mode": results[0].diagnostics["branch_mode"],
        "seeds": [r.diagnostics["seed"] for r in results],
        "notes": notes + results[0].diagnostics["notes"],
    }
    (out_dir / "diagnostics.json").write_text(json.dumps(diag, indent=2) + "\n")
    _write_manifest(cfg, out_dir, "sample")
    print(json.dumps({"out": str(out_dir), "nfe": diag["nfe"]}))
    return 0


def cmd_schedule_dump(args) -> int:
    cfg = RunConfig.load(args.config, args.preset, args.set)
    if args.kind:
        cfg.set("schedule", args.kind)
    if args.steps:
        cfg.set("steps", str(args.steps))
    print(json.dumps(list(_build_timesteps(cfg).steps)))
    return 0


def _metric_row(ref: np.ndarray, img: np.ndarray) -> dict[str, float]:
    return {
        "psnr": psnr(ref, img),
        "ssim": ssim(ref, img),
        "iou": iou_mask(ref, img),
        "mse": float(np.mean((np.float64(ref) - np.float64(img)) ** 2)),
    }


def cmd_metrics(args) -> int:
    ref = read_ppm(args.ref)
    gen_img = read_ppm(args.generated)
    row = _metric_row(ref, gen_img)
    if args.format == "csv":
        writer = csv.DictWriter(sys.stdout, fieldnames=list(row))
        writer.writeheader()
        writer.writerow(row)
    else:
        print(json.dumps(row, indent=2))
    return 0


def cmd_diversity(args) -> int:
    images = [read_ppm(p) for p in args.images]
    print(json.dumps({"seed_diversity": seed_diversity(images)}))
    return 0


def cmd_ablate(args) -> int:
    cfg = RunConfig.load(args.config, args.preset, args.set)
    image_paths = sorted(Path(args.images).glob("*.ppm")) if Path(
        args.images
    ).is_dir() else [Path(args.images)]
    if not image_paths:
        raise ConfigError(f"no .ppm images found under {args.images}")
    targets = [read_ppm(p) for p in image_paths]
    out_dir = Path(args.out or cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    n_seeds = max(2, cfg.get_int("n_seeds"))

    rows = []
    for hourglass, resample, amf, msa in ABLATION_ROWS:
        row_cfg = RunConfig(dict(cfg.values))
        row_cfg.set("schedule", "hourglass" if hourglass else "uniform")
        row_cfg.set("resample", "on" if resample else "off")
        row_cfg.set("amf", "on" if amf else "off")
        row_cfg.set("msa", "on" if msa else "off")
        scores = {"psnr": [], "ssim": [], "iou": [], "diversity": []}
        nfe = steps = None
        for target in targets:
            gen, _ = _build_generation(row_cfg, source_image=target)
            results = _run_seeds(gen, n_seeds)
            nfe = results[0].nfe.per_branch["target"]
            steps = results[0].diagnostics["steps"]
            samples = [r.sample for r in results]
            for s in samples:
                m = _metric_row(target, s) if _is_image(s) else None
                if m:
                    for key in ("psnr", "ssim", "iou"):
                        scores[key].append(m[key])
            scores["diversity"].append(seed_diversity(samples))
        rows.append(
            {
                "hourglass": int(hourglass),
                "resample": int(resample),
                "amf": int(amf),
                "msa": int(msa),
                "steps": steps,
                "nfe": nfe,
                "psnr": _mean_or_nan(scores["psnr"]),
                "ssim": _mean_or_nan(scores["ssim"]),
                "iou": _mean_or_nan(scores["iou"]),
                "diversity": _mean_or_nan(scores["diversity"]),
            }
        )
    out_path = out_dir / "ablation.csv"
    with open(out_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    _write_manifest(cfg, out_dir, "ablate", {"images": [str(p) for p in image_paths]})
    print(json.dumps({"out": str(out_path), "rows": len(rows)}))
    return 0


def _mean_or_nan(xs: list[float]) -> float:
    return float(np.mean(xs)) if xs else float("nan")


def cmd_gt_inject(args) -> int:
    cfg = RunConfig.load(args.config, args.preset, args.set)
    if args.tau_init is not None:
        cfg.set("gt_tau_init", str(args.tau_init))
    tau_init = cfg.get_int("gt_tau_init")
    target = read_ppm(args.target)
    out_dir = Path(args.out or cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)

    cfg.set("msa", "off")  # single-branch paired comparison
    gen, notes = _build_generation(cfg, source_image=target)
    captured = gt_map_capture(
        gen.denoiser,
        gen.noise_schedule,
        target,
        gen.condition,
        rngmod.stream(gen.seed, "gt-capture"),
        tau_init=tau_init,
    )
    without = generate(gen)
    with_gt = generate(dataclasses.replace(gen, gt_maps=captured))

    report: dict = {"tau_init": tau_init, "nfe": without.nfe.per_branch["target"]}
    if _is_image(without.sample):
        for key, value in _metric_row(target, without.sample).items():
            report.setdefault(key, {})["without_gt"] = value
        for key, value in _metric_row(target, with_gt.sample).items():
            report.setdefault(key, {})["with_gt"] = value
        write_ppm(out_dir / "without_gt.ppm", without.sample)
        write_ppm(out_dir / "with_gt.ppm", with_gt.sample)
    report["notes"] = notes
    (out_dir / "gt_inject.json").write_text(json.dumps(report, indent=2) + "\n")
    _write_manifest(cfg, out_dir, "gt-inject", {"target": str(args.target)})
    print(json.dumps(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attnsample")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--preset", default="default", choices=sorted(PRESETS))
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--out", help="output directory (overrides config)")

    p = sub.add_parser("sample", help="run generations and write images/tensors")
    common(p)
    p.add_argument("--seed", type=int, help="shortcut for --set seed=N")
    p.add_argument("--dump-tensor", action="store_true")
    p.add_argument("--dump-maps", action="store_true")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("schedule-dump", help="print the timestep schedule as JSON")
    common(p)
    p.add_argument("--kind", choices=["hourglass", "uniform"])
    p.add_argument("--steps", type=int)
    p.set_defaults(func=cmd_schedule_dump)

    p = sub.add_parser("ablate", help="run the six-row toggle grid")
    common(p)
    p.add_argument("--images", required=True, help="PPM file or directory")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gt-inject", help="paired run with/without captured maps")
    common(p)
    p.add_argument("--target", required=True, help="target-view PPM")
    p.add_argument("--tau-init", type=int, dest="tau_init")
    p.set_defaults(func=cmd_gt_inject)

    p = sub.add_parser("metrics", help="compare two images")
    p.add_argument("--ref", required=True)
    p.add_argument("--generated", required=True)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("diversity", help="seed-diversity statistic of images")
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_diversity)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None:
        args.set = list(args.set) + [f"seed={args.seed}"]
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (OSError, FormatError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
