import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attnsample import TimestepSchedule, hourglass_schedule, uniform_schedule
from attnsample.errors import ScheduleError

DEFAULT_26 = (
    [1000, 980, 960, 940, 920, 900, 880, 860, 840, 820]
    + [800, 700, 600, 500, 400, 300]
    + [200, 180, 160, 140, 120, 100, 80, 60, 40, 20]
)


class TestUniform:
    def test_25_steps_stride_40(self):
        sched = uniform_schedule(1000, 25)
        assert list(sched.steps) == list(range(1000, 0, -40))

    def test_single_step(self):
        assert uniform_schedule(1000, 1).steps == (1000,)

    def test_50_steps_stride_20(self):
        sched = uniform_schedule(1000, 50)
        assert len(sched) == 50
        assert list(sched.steps) == list(range(1000, 0, -20))

    def test_out_of_range_count(self):
        with pytest.raises(ScheduleError):
            uniform_schedule(1000, 0)
        with pytest.raises(ScheduleError):
            uniform_schedule(10, 11)


class TestHourglass:
    def test_default_26_steps(self):
        sched = hourglass_schedule(1000)
        assert list(sched.steps) == DEFAULT_26
        assert len(sched) == 26

    def test_default_density_ratio_is_five(self):
        sched = hourglass_schedule(1000)
        # early 10/200 = 0.05 vs middle 6/600 = 0.01
        assert sched.density_ratio == pytest.approx(5.0)
        assert sched.stage_bounds == (200, 800)

    def test_single_stage_equals_uniform(self):
        assert (
            hourglass_schedule(1000, ((0, 1000, 25),)).steps
            == uniform_schedule(1000, 25).steps
        )

    def test_equal_densities_equal_uniform(self):
        sched = hourglass_schedule(1000, ((500, 1000, 10), (0, 500, 10)))
        assert sched.steps == uniform_schedule(1000, 20).steps

    def test_gapped_stages_rejected(self):
        with pytest.raises(ScheduleError):
            hourglass_schedule(1000, ((800, 1000, 5), (0, 700, 5)))

    def test_overlapping_stages_rejected(self):
        with pytest.raises(ScheduleError):
            hourglass_schedule(1000, ((700, 1000, 5), (0, 800, 5)))

    def test_count_exceeding_width_rejected(self):
        with pytest.raises(ScheduleError):
            hourglass_schedule(1000, ((990, 1000, 11), (0, 990, 5)))

    def test_uncovered_range_rejected(self):
        with pytest.raises(ScheduleError):
            hourglass_schedule(1000, ((100, 1000, 5),))


@st.composite
def stage_tuples(draw):
    t = draw(st.integers(min_value=50, max_value=2000))
    n_bounds = draw(st.integers(min_value=0, max_value=3))
    cuts = draw(
        st.lists(
            st.integers(min_value=1, max_value=t - 1),
            min_size=n_bounds,
            max_size=n_bounds,
            unique=True,
        )
    )
    bounds = [t] + sorted(cuts, reverse=True) + [0]
    stages = []
    for hi, lo in zip(bounds, bounds[1:]):
        count = draw(st.integers(min_value=1, max_value=hi - lo))
        stages.append((lo, hi, count))
    return t, tuple(stages)


class TestScheduleInvariants:
    @given(stage_tuples())
    @settings(max_examples=100, deadline=None)
    def test_random_valid_stages_emit_valid_schedules(self, data):
        t, stages = data
        sched = hourglass_schedule(t, stages)
        steps = sched.steps
        assert all(1 <= s <= t for s in steps)
        assert all(a > b for a, b in zip(steps, steps[1:]))
        assert len(set(steps)) == len(steps)
        assert len(steps) == sum(c for _, _, c in stages)

    def test_strictly_decreasing_enforced(self):
        with pytest.raises(ScheduleError):
            TimestepSchedule(steps=(100, 100))
        with pytest.raises(ScheduleError):
            TimestepSchedule(steps=(100, 200))
        with pytest.raises(ScheduleError):
            TimestepSchedule(steps=(5, 0))

    def test_walk_ends_at_zero(self):
        sched = uniform_schedule(1000, 3)
        pairs = list(sched.walk())
        assert pairs[-1][1] == 0
        assert [t for t, _ in pairs] == list(sched.steps)
