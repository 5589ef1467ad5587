"""Integrator behavior: stop detection, impulses, dense output, accuracy.

The fixed-step cross-check at the bottom uses oracles.rk4_survival, which
shares no code with the adaptive path.
"""

import dataclasses
import math

import numpy as np
import pytest

from gliotrial import (
    DoseEvent,
    IntegratorConfig,
    StopKind,
    SystemState,
    dense_sample,
    integrate,
)
from gliotrial.model import ERADICATION_CELLS, FATAL_TUMOR_CELLS
from oracles import rk4_survival


class TestConfigValidation:
    def test_defaults(self):
        cfg = IntegratorConfig()
        assert cfg.rel_tol == 1e-8
        assert cfg.abs_tol == 1e-12
        assert cfg.max_step == 1.0
        assert cfg.event_time_tol == 1e-3
        assert cfg.horizon == 3650.0

    def test_nonpositive_tolerances_rejected(self):
        with pytest.raises(ValueError, match="tolerances"):
            IntegratorConfig(rel_tol=0.0)
        with pytest.raises(ValueError, match="tolerances"):
            IntegratorConfig(abs_tol=-1e-12)

    def test_event_time_tol_bounded(self):
        with pytest.raises(ValueError, match="event_time_tol"):
            IntegratorConfig(event_time_tol=2e-3)
        with pytest.raises(ValueError, match="event_time_tol"):
            IntegratorConfig(event_time_tol=0.0)

    def test_nonpositive_max_step_and_horizon_rejected(self):
        with pytest.raises(ValueError, match="max_step"):
            IntegratorConfig(max_step=0.0)
        with pytest.raises(ValueError, match="horizon"):
            IntegratorConfig(horizon=-1.0)


class TestInputValidation:
    def test_negative_initial_component_rejected(self, mvp):
        bad = SystemState(t=0.0, S=-1.0, RC=0.0, RE=0.0, C=0.0, E=0.0)
        with pytest.raises(ValueError, match=">= 0"):
            integrate(bad, mvp)

    def test_non_finite_initial_state_rejected(self, mvp):
        bad = SystemState(t=0.0, S=np.nan, RC=0.0, RE=0.0, C=0.0, E=0.0)
        with pytest.raises(ValueError, match="finite"):
            integrate(bad, mvp)

    def test_initial_time_must_precede_horizon(self, mvp):
        late = SystemState(t=3650.0, S=1e10, RC=0.0, RE=0.0, C=0.0, E=0.0)
        with pytest.raises(ValueError, match="horizon"):
            integrate(late, mvp)

    def test_unsorted_events_rejected(self, mvp):
        events = [DoseEvent(7.0, "chemo", 1.0), DoseEvent(3.0, "chemo", 1.0)]
        with pytest.raises(ValueError, match="sorted"):
            integrate(mvp.initial_state(), mvp, events=events)

    def test_event_before_start_rejected(self, mvp):
        start = SystemState(t=10.0, S=1e10, RC=1e9, RE=1e8, C=0.0, E=0.0)
        with pytest.raises(ValueError, match="precedes"):
            integrate(start, mvp, events=[DoseEvent(3.0, "chemo", 1.0)])

    def test_negative_dose_amount_rejected(self, mvp):
        with pytest.raises(ValueError, match="amount"):
            integrate(mvp.initial_state(), mvp,
                      events=[DoseEvent(3.0, "chemo", -0.5)])

    def test_unknown_dose_kind_rejected(self, mvp):
        with pytest.raises(ValueError, match="kind"):
            integrate(mvp.initial_state(), mvp,
                      events=[DoseEvent(3.0, "radiation", 1.0)])

    def test_negative_constant_treatment_rejected(self, mvp):
        with pytest.raises(ValueError, match=">= 0"):
            integrate(mvp.initial_state(), mvp, constant_treatment=(-1.0, 0.0))


class TestStopKinds:
    def test_untreated_patient_reaches_fatal_burden(self, mvp):
        traj, stop = integrate(mvp.initial_state(), mvp)
        assert stop.kind is StopKind.FATAL_SIZE
        assert 0.0 < stop.time < 3650.0
        # Bisection localizes the crossing, so the stop state sits on the
        # fatal surface to within the event window.
        assert np.isclose(stop.state.tumor_total, FATAL_TUMOR_CELLS, rtol=1e-4)
        assert traj.t_final == stop.time

    def test_record_false_gives_identical_stop(self, mvp):
        _, with_record = integrate(mvp.initial_state(), mvp)
        traj, without = integrate(mvp.initial_state(), mvp, record=False)
        assert traj is None
        assert without.kind is with_record.kind
        assert without.time == with_record.time
        assert np.array_equal(without.state.as_array(),
                              with_record.state.as_array())

    def test_slow_growth_is_censored_at_horizon(self, mvp):
        slow = mvp.with_(r1=1e-4, r2=5e-5)
        _, stop = integrate(slow.initial_state(), slow, record=False)
        assert stop.kind is StopKind.HORIZON
        assert stop.time == 3650.0
        assert stop.state.tumor_total < FATAL_TUMOR_CELLS

    def test_dose_scheduled_past_horizon_is_ignored(self, mvp):
        slow = mvp.with_(r1=1e-4, r2=5e-5)
        _, stop = integrate(slow.initial_state(), slow, record=False,
                            config=IntegratorConfig(horizon=10.0),
                            events=[DoseEvent(20.0, "chemo", 1.0)])
        assert stop.kind is StopKind.HORIZON
        assert stop.time == 10.0
        assert stop.state.E == 0.0

    def test_strong_constant_treatment_eradicates(self, mvp):
        _, stop = integrate(mvp.initial_state(), mvp, record=False,
                            config=IntegratorConfig(horizon=600.0),
                            constant_treatment=(1e8, 1.0))
        assert stop.kind is StopKind.ERADICATED
        assert stop.time < 600.0
        assert stop.state.tumor_total < ERADICATION_CELLS

    def test_subcellular_initial_burden_is_immediately_eradicated(self, mvp):
        tiny = SystemState(t=0.0, S=0.5, RC=0.0, RE=0.0, C=0.0, E=0.0)
        traj, stop = integrate(tiny, mvp, record=False)
        assert traj is None
        assert stop.kind is StopKind.ERADICATED
        assert stop.time == 0.0
        traj, stop = integrate(tiny, mvp)
        assert stop.kind is StopKind.ERADICATED
        assert traj.span() == (0.0, 0.0)


@pytest.fixture(scope="module")
def dosed(mvp):
    events = [DoseEvent(3.0, "chemo", 0.4),
              DoseEvent(7.0, "cart", 5e8),
              DoseEvent(14.0, "cart", 5e8)]
    traj, stop = integrate(mvp.initial_state(), mvp, events=events,
                           config=IntegratorConfig(horizon=30.0))
    assert stop.kind is StopKind.HORIZON
    return traj


@pytest.fixture(scope="module")
def decaying(mvp):
    traj, _ = integrate(mvp.initial_state(), mvp,
                        events=[DoseEvent(0.0, "chemo", 1.0)],
                        config=IntegratorConfig(horizon=30.0))
    return traj


@pytest.fixture(scope="module")
def untreated_run(mvp):
    return integrate(mvp.initial_state(), mvp)


class TestImpulses:
    def test_first_chemo_dose_sets_e_exactly(self, dosed):
        state = dense_sample(dosed, [3.0])[0]
        assert state.E == 0.4

    def test_first_injection_jump_is_exact(self, dosed):
        pre, post = dense_sample(dosed, [7.0 - 1e-9, 7.0])
        assert pre.C == 0.0
        assert np.isclose(post.C, 5e8, rtol=1e-12)

    def test_second_injection_adds_exactly_one_dose(self, dosed):
        pre, post = dense_sample(dosed, [14.0 - 1e-9, 14.0])
        assert pre.C > 0.0
        assert np.isclose(post.C - pre.C, 5e8, rtol=1e-6)

    def test_sampling_at_dose_time_is_right_continuous(self, dosed):
        # The dose instant carries the post-impulse state; the pre-impulse
        # value is only reachable from the left.
        pre, post = dense_sample(dosed, [7.0 - 1e-9, 7.0])
        assert post.C > pre.C

    def test_dose_times_are_step_boundaries(self, dosed):
        for t in (3.0, 7.0, 14.0):
            assert t in dosed.t0


class TestExponentialDecayLaw:
    """Between doses E decays as exp(-mu t), exactly solvable."""

    def test_half_day_decay(self, decaying, mvp):
        state = dense_sample(decaying, [0.5])[0]
        assert np.isclose(state.E, math.exp(-0.5 * mvp.mu), rtol=1e-6)

    def test_full_day_decay(self, decaying, mvp):
        state = dense_sample(decaying, [1.0])[0]
        assert np.isclose(state.E, math.exp(-mvp.mu), rtol=1e-6)

    def test_decay_ratio(self, decaying, mvp):
        half, full = dense_sample(decaying, [0.5, 1.0])
        assert np.isclose(full.E / half.E, math.exp(-0.5 * mvp.mu), rtol=1e-6)


class TestConstantTreatment:
    def test_e_follows_closed_form_accumulation(self, mvp):
        # With a constant source e0 and decay mu, E(t) = e0/mu (1 - exp(-mu t)).
        e0 = 0.5
        traj, _ = integrate(mvp.initial_state(), mvp,
                            config=IntegratorConfig(horizon=5.0),
                            constant_treatment=(0.0, e0))
        for t, state in zip([1.0, 3.0], dense_sample(traj, [1.0, 3.0])):
            exact = e0 / mvp.mu * (1.0 - math.exp(-mvp.mu * t))
            assert np.isclose(state.E, exact, rtol=1e-6)


class TestTrajectory:
    def test_span_covers_start_to_stop(self, untreated_run, mvp):
        traj, stop = untreated_run
        assert traj.span() == (0.0, stop.time)

    def test_states_list_matches_step_records(self, untreated_run, mvp):
        traj, _ = untreated_run
        states = traj.states()
        assert len(states) == traj.t0.size + 1
        first = states[0].as_array()
        assert np.allclose(first, mvp.initial_state().as_array(), rtol=1e-12)

    def test_step_starts_increase_and_respect_max_step(self, untreated_run):
        traj, _ = untreated_run
        assert np.all(np.diff(traj.t0) > 0)
        assert np.all(traj.h > 0)
        assert np.all(traj.h <= 1.0 + 1e-12)

    def test_dense_sample_at_step_start_returns_stored_state(self, untreated_run):
        traj, _ = untreated_run
        k = traj.t0.size // 2
        t = float(traj.t0[k])
        sampled = dense_sample(traj, [t])[0]
        stored = traj.states()[k]
        assert np.array_equal(sampled.as_array(), stored.as_array())

    def test_dense_sample_outside_span_rejected(self, untreated_run):
        traj, stop = untreated_run
        with pytest.raises(ValueError, match="span"):
            dense_sample(traj, [stop.time + 1.0])
        with pytest.raises(ValueError, match="span"):
            dense_sample(traj, [-1.0])

    def test_dense_sample_requires_ascending_times(self, untreated_run):
        traj, _ = untreated_run
        with pytest.raises(ValueError, match="ascending"):
            dense_sample(traj, [2.0, 1.0])

    def test_dense_sample_is_continuous_inside_a_step(self, untreated_run):
        traj, _ = untreated_run
        k = traj.t0.size // 2
        t = float(traj.t0[k]) + 0.5 * float(traj.h[k])
        eps = 1e-8
        lo, mid, hi = dense_sample(traj, [t - eps, t, t + eps])
        assert np.allclose(lo.as_array(), mid.as_array(), rtol=1e-6)
        assert np.allclose(hi.as_array(), mid.as_array(), rtol=1e-6)


class TestAccuracy:
    def test_survival_time_converged_in_tolerance(self, mvp):
        _, loose = integrate(mvp.initial_state(), mvp, record=False,
                             config=IntegratorConfig(rel_tol=1e-6, abs_tol=1e-10))
        _, tight = integrate(mvp.initial_state(), mvp, record=False,
                             config=IntegratorConfig(rel_tol=1e-10, abs_tol=1e-14))
        assert loose.kind is StopKind.FATAL_SIZE
        assert tight.kind is StopKind.FATAL_SIZE
        assert abs(loose.time - tight.time) < 0.1

    def test_matches_fixed_step_oracle(self, mvp):
        # Independent fixed-step RK4 at dt = 1e-3 days; agreement on the
        # fatal-crossing day is required to within half a day.
        _, stop = integrate(mvp.initial_state(), mvp, record=False)
        assert stop.kind is StopKind.FATAL_SIZE
        table = {f.name: np.array([getattr(mvp, f.name)])
                 for f in dataclasses.fields(mvp)}
        initial = mvp.initial_state().as_array()[np.newaxis, :]
        oracle_days = rk4_survival(table, initial, [], 300)
        assert np.isfinite(oracle_days[0])
        assert abs(stop.time - oracle_days[0]) < 0.5
