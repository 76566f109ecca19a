"""Timestep schedules: the uniform baseline vs the 3-stage hourglass.

The hourglass schedule spends 5x more steps per unit time at the very start
(where resampling and filtering act) and at the very end (where fine detail
forms) than in the middle, at a similar total budget.
"""

from attnsample import hourglass_schedule, uniform_schedule

uniform = uniform_schedule(1000, 25)
hourglass = hourglass_schedule(1000)

print("uniform-25 :", list(uniform.steps))
print()
print("hourglass  :", list(hourglass.steps))
print()
print(f"hourglass steps: {len(hourglass)}")
print(f"stage bounds:    {hourglass.stage_bounds}")
print(f"density ratio (early stage vs middle stage): {hourglass.density_ratio:.1f}")

print()
print("schedule walk (t -> t_prev), last five pairs:")
for t, t_prev in list(hourglass.walk())[-5:]:
    print(f"  {t:4d} -> {t_prev:4d}")
