"""Reference-map injection: an oracle upper bound for attention control.

Capture every self-attention map from one forward pass on a lightly noised
encoding of the true target, then override the live maps with the captured
ones during generation. The generation is deliberately underdetermined (a
blank source view), so the captured maps carry structure the conditioning
does not; the comparison is error-to-target with and without the injected
maps, on paired seeds.

Uses trained weights from shared/weights.zth when present, seeded random
weights otherwise.
"""

from pathlib import Path

import numpy as np

from attnsample import (
    Condition,
    FilterConfig,
    GenerationConfig,
    NoiseSchedule,
    ToyDenoiser,
    generate,
    gt_map_capture,
    hourglass_schedule,
)
from attnsample import rng as rngmod

weights = Path(__file__).resolve().parent.parent / "shared" / "weights.zth"
if weights.exists():
    denoiser = ToyDenoiser.from_file(weights)
    print(f"using trained weights: {weights}")
else:
    denoiser = ToyDenoiser.randomized(seed=0)
    print("trained weights not found; using seeded random weights")

schedule = NoiseSchedule.scaled_linear()
target = np.ones((16, 16, 3), dtype=np.float32)
target[4:12, 5:11] = np.array([0.2, 0.45, 0.7], dtype=np.float32)
blank = np.ones((16, 16, 3), dtype=np.float32)
cond = Condition.identity(source_image=blank)
fc = FilterConfig.disabled()

mse = lambda a, b: float(np.mean((np.float64(a) - np.float64(b)) ** 2))
print(f"\n{'seed':>4} {'mse without':>12} {'mse with':>10} {'better?':>8}")
wins = 0
n_seeds = 5
for seed in range(n_seeds):
    maps = gt_map_capture(
        denoiser, schedule, target, cond, rngmod.stream(seed, "gt-capture")
    )
    base = GenerationConfig(
        denoiser=denoiser,
        timesteps=hourglass_schedule(1000),
        noise_schedule=schedule,
        filter=fc,
        condition=cond,
        seed=seed,
        latent_shape=(16, 16, 3),
    )
    without = generate(base)
    import dataclasses

    with_gt = generate(dataclasses.replace(base, gt_maps=maps))
    m0, m1 = mse(without.sample, target), mse(with_gt.sample, target)
    wins += m1 < m0
    print(f"{seed:>4} {m0:>12.4f} {m1:>10.4f} {'yes' if m1 < m0 else 'no':>8}")

print(f"\ninjection helped on {wins}/{n_seeds} seeds")
