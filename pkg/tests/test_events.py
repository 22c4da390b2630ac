import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heavytail_ldp.errors import ConfigError, UnsupportedEvent
from heavytail_ldp.events import (And, BandAround, Or, RunningInfAtMost, RunningSupAtLeast, TerminalAtLeast,
                                  TerminalAtMost, TimeSlice, barrier_event, event_from_dict, event_jump_index,
                                  event_to_dict, summarize_jumps, summarize_stepfn)
from heavytail_ldp.pathspace import StepFn, m1prime_distance

LEAVES = [TerminalAtLeast(1.0), TerminalAtMost(-0.5), RunningSupAtLeast(2.0), RunningInfAtMost(-1.0),
          TimeSlice(0.5, 1.0), TimeSlice(0.25, -1.0, above=False), BandAround(0.5, 0.3)]


@pytest.mark.parametrize("event", LEAVES + [barrier_event(1.0, 2.0), Or(LEAVES[0], And(LEAVES[4], LEAVES[6]))])
def test_json_round_trip(event):
    assert event_from_dict(event_to_dict(event)) == event


@pytest.mark.parametrize("bad", [{"terminal_at_least": 1, "x": 2}, {"and": []}, {"nope": 1},
                                 {"time_slice": {"t": 0.5}}, {"band": {"slope": 1}}, [1, 2],
                                 {"time_slice": {"t": 2.0, "at_least": 1}}])
def test_bad_json(bad):
    with pytest.raises(ConfigError):
        event_from_dict(bad)


def test_membership():
    xi = StepFn([0.3, 0.6], [2.0, -3.0], drift=0.5)
    assert xi.terminal == pytest.approx(-0.5)
    assert RunningSupAtLeast(2.0).contains(xi)
    assert RunningInfAtMost(-0.7).contains(xi)
    assert not RunningInfAtMost(-0.8).contains(xi)
    assert TimeSlice(0.5, 2.2).contains(xi)
    assert TerminalAtMost(-0.5).contains(xi) and not TerminalAtLeast(0.0).contains(xi)
    assert not barrier_event(1.0, 0.1).contains(xi)
    assert (TerminalAtMost(0.0) | TerminalAtLeast(5.0)).contains(xi)
    assert BandAround(0.5, 2.0).contains(xi) and not BandAround(0.5, 1.9).contains(xi)


def test_dnf():
    e = And(Or(LEAVES[0], LEAVES[1]), LEAVES[2])
    assert e.dnf() == [(LEAVES[0], LEAVES[2]), (LEAVES[1], LEAVES[2])]
    assert e.slice_times() == [] and len(e.primitives()) == 3


@settings(max_examples=60)
@given(st.lists(st.tuples(st.floats(0.0, 1.0), st.floats(-3.0, 3.0)), min_size=1, max_size=4,
                unique_by=lambda j: j[0]),
       st.floats(-1.0, 1.0))
def test_vectorized_summaries_match(jumps, drift):
    times = np.array([[t for t, _ in jumps]])
    sizes = np.array([[s for _, s in jumps]])
    vec = summarize_jumps(times, sizes, drift, slice_times=(0.3, 0.7), band_slopes=(0.5,))
    ref = summarize_stepfn(StepFn(times[0], sizes[0], drift), slice_times=(0.3, 0.7), band_slopes=(0.5,))
    for key in ("terminal", "inf", "sup"):
        assert vec[key][0] == pytest.approx(min(ref[key], 0.0) if key == "inf" else
                                            max(ref[key], 0.0) if key == "sup" else ref[key], abs=1e-9)
    for t in (0.3, 0.7):
        assert vec["slices"][t][0] == pytest.approx(ref["slices"][t], abs=1e-9)


class TestJumpIndex:
    def test_terminal_level(self):
        cert = event_jump_index(TerminalAtLeast(2.0), 0.0)
        assert cert.j == 1 and cert.separated
        assert cert.radius == pytest.approx(2.0, rel=1e-6)

    def test_drift_reaches_level(self):
        assert event_jump_index(TerminalAtLeast(0.5), 1.0).j == 0
        assert event_jump_index(TerminalAtLeast(2.0), 1.0).j == 1
        assert event_jump_index(TerminalAtMost(-1.0), 1.0).j == 1

    def test_barrier(self):
        cert = event_jump_index(barrier_event(1.0, 1.0), 0.0)
        assert cert.j == 2
        assert cert.radius == pytest.approx(1.0, rel=1e-6)
        assert barrier_event(1.0, 1.0).contains(cert.witness)
        assert cert.witness.n_jumps == 2

    def test_one_sided_cannot_go_down(self):
        with pytest.raises(UnsupportedEvent):
            event_jump_index(barrier_event(1.0, 1.0), 0.0, one_sided=True, max_jumps=3)

    def test_oscillation_needs_three_jumps(self):
        e = And(TimeSlice(0.25, 1.0), TimeSlice(0.5, -1.0, above=False), TerminalAtLeast(1.0))
        cert = event_jump_index(e, 0.0)
        assert cert.j == 3
        assert e.contains(cert.witness)

    def test_too_many_primitives(self):
        e = And(*[TerminalAtLeast(float(i)) for i in range(7)])
        with pytest.raises(UnsupportedEvent):
            event_jump_index(e, 0.0)

    @settings(max_examples=15)
    @given(st.lists(st.tuples(st.floats(0.0, 1.0), st.floats(-2.0, 2.0)), max_size=1))
    def test_radius_bounds_distance_to_witness(self, jumps):
        # every path with one jump is at least the radius away from any member
        cert = event_jump_index(barrier_event(1.0, 1.0), 0.0)
        xi = StepFn([t for t, _ in jumps], [s for _, s in jumps])
        assert m1prime_distance(xi, cert.witness, 0.02) >= cert.radius - 0.02
