"""Timestep schedules: uniform DDIM subsampling and the 3-stage staged
(dense-sparse-dense) scheme with a configurable density ratio.

Stage intervals are half-open ``(lo, hi]`` so adjacent stages never
double-count their shared boundary. Step positions are rounded to the
nearest integer; collisions are resolved by decrementing.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ScheduleError

# Default 3-stage layout: 10 steps in (800, 1000], 6 in (200, 800],
# 10 in (0, 200] -- 26 steps total, early:middle density ratio 5.
DEFAULT_STAGES = ((800, 1000, 10), (200, 800, 6), (0, 200, 10))


@dataclass(frozen=True)
class TimestepSchedule:
    """Strictly decreasing integer timesteps in [1, T]."""

    steps: tuple[int, ...]
    stage_bounds: tuple[int, int] | None = None
    density_ratio: float | None = None

    def __post_init__(self):
        steps = tuple(int(s) for s in self.steps)
        if not steps:
            raise ScheduleError("schedule must contain at least one step")
        if any(s < 1 for s in steps):
            raise ScheduleError("timesteps must be >= 1")
        if any(a <= b for a, b in zip(steps, steps[1:])):
            raise ScheduleError("timesteps must be strictly decreasing")
        object.__setattr__(self, "steps", steps)

    def __len__(self) -> int:
        return len(self.steps)

    def walk(self):
        """Yield (t, t_prev) pairs down to t_prev = 0."""
        for i, t in enumerate(self.steps):
            t_prev = self.steps[i + 1] if i + 1 < len(self.steps) else 0
            yield t, t_prev


def _stage_steps(lo: int, hi: int, count: int) -> list[int]:
    width = hi - lo
    if count > width:
        raise ScheduleError(
            f"stage ({lo}, {hi}] cannot hold {count} distinct steps"
        )
    steps: list[int] = []
    for i in range(count):
        s = round(hi - i * width / count)
        while steps and s >= steps[-1]:
            s -= 1
        steps.append(s)
    if steps[-1] <= lo:
        raise ScheduleError(f"stage ({lo}, {hi}] overflows below its lower bound")
    return steps


def uniform_schedule(T: int, n: int) -> TimestepSchedule:
    """n steps evenly spaced over (0, T], descending, first step T."""
    if not 1 <= n <= T:
        raise ScheduleError(f"step count {n} outside [1, {T}]")
    return TimestepSchedule(steps=tuple(_stage_steps(0, T, n)))


def hourglass_schedule(
    T: int, stages: tuple[tuple[int, int, int], ...] = DEFAULT_STAGES
) -> TimestepSchedule:
    """Concatenated per-stage uniform schedules over a tiling of (0, T].

    ``stages`` lists (lo, hi, count) half-open intervals, descending and
    contiguous, covering (0, T] exactly.
    """
    stages = tuple(stages)
    if not stages:
        raise ScheduleError("need at least one stage")
    if stages[0][1] != T or stages[-1][0] != 0:
        raise ScheduleError(f"stages must cover (0, {T}] exactly")
    for (lo, hi, count) in stages:
        if not 0 <= lo < hi:
            raise ScheduleError(f"invalid stage interval ({lo}, {hi}]")
        if count < 1:
            raise ScheduleError("stage counts must be >= 1")
    for (lo, _, _), (_, hi_next, _) in zip(stages, stages[1:]):
        if hi_next != lo:
            raise ScheduleError("stages must be contiguous without overlap")

    steps: list[int] = []
    for lo, hi, count in stages:
        steps.extend(_stage_steps(lo, hi, count))

    bounds = None
    ratio = None
    if len(stages) == 3:
        (_, _, n_early), (mid_lo, mid_hi, n_mid), (_, _, _) = stages
        bounds = (mid_lo, mid_hi)
        early_density = n_early / (T - mid_hi)
        mid_density = n_mid / (mid_hi - mid_lo)
        ratio = early_density / mid_density
    return TimestepSchedule(
        steps=tuple(steps), stage_bounds=bounds, density_ratio=ratio
    )
