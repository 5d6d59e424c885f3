import numpy as np
import pytest

from supertrack.errors import ConfigError
from supertrack.signals import (
    ActiveTargetTrace,
    SinusoidConfig,
    SwitchParams,
    active_index,
    active_index_series,
    build_switch_schedule,
    make_reference_set,
    reference_matrix,
    sample_reference,
    sample_reference_rate,
)

from conftest import single_component_config, zero_phase_set


def test_make_reference_set_is_deterministic(default_config):
    a = make_reference_set(default_config, seed=7)
    b = make_reference_set(default_config, seed=7)
    assert np.array_equal(a.phases, b.phases)


def test_make_reference_set_seed_changes_phases(default_config):
    a = make_reference_set(default_config, seed=1)
    b = make_reference_set(default_config, seed=2)
    assert (a.phases != b.phases).any()


def test_phases_in_range(default_config):
    for seed in range(20):
        ph = make_reference_set(default_config, seed).phases
        assert (ph >= 0).all() and (ph < 2 * np.pi).all()


def test_mismatched_lengths_rejected():
    with pytest.raises(ConfigError):
        SinusoidConfig(multiples=(6, 10, 15, 23, 37, 57, 97, 154, 289, 527),
                       amplitudes=(20.0,) * 9)


def test_invalid_config_rejected():
    with pytest.raises(ConfigError):
        SinusoidConfig(base_frequency=0.0)
    with pytest.raises(ConfigError):
        SinusoidConfig(amplitude_scale=-1.0)
    with pytest.raises(ConfigError):
        SinusoidConfig(multiples=(10, 6), amplitudes=(1.0, 1.0))


def test_sample_reference_zero_phase_at_zero(default_config):
    rs = zero_phase_set(default_config)
    for i in (1, 2, 3):
        assert sample_reference(rs, i, 0.0) == 0.0


def test_sample_reference_single_component_quarter_period():
    rs = zero_phase_set(single_component_config())
    t_quarter = 1.0 / (4 * 0.15)
    assert sample_reference(rs, 1, t_quarter) == pytest.approx(1.0, abs=1e-12)
    assert sample_reference_rate(rs, 1, t_quarter) == pytest.approx(0.0, abs=1e-9)


def test_reference_is_40s_periodic(default_set):
    bound = default_set.config.signal_bound
    t = np.linspace(0.0, 50.0, 601)
    for i in (1, 2, 3):
        a = sample_reference(default_set, i, t)
        b = sample_reference(default_set, i, t + 40.0)
        assert np.max(np.abs(a - b)) < 1e-9 * bound


def test_reference_bound(default_set):
    t = np.linspace(0.0, 90.0, 9001)
    bound = default_set.config.signal_bound
    for i in (1, 2, 3):
        assert np.max(np.abs(sample_reference(default_set, i, t))) <= bound


def test_rate_at_zero_with_zero_phases(default_config):
    rs = zero_phase_set(default_config)
    expected = float(
        (rs.config.scaled_amplitudes * 2 * np.pi * rs.config.frequencies).sum()
    )
    assert sample_reference_rate(rs, 2, 0.0) == pytest.approx(expected, rel=1e-12)


def test_rate_matches_finite_difference(default_set):
    # 5-point stencil keeps truncation error ~1e-10, well under the gate
    h = 1e-4
    rng = np.random.default_rng(42)
    ts = rng.uniform(1.0, 80.0, size=100)
    scale = default_set.config.amplitude_scale
    for i in (1, 2, 3):
        for t in ts:
            fd = (
                -sample_reference(default_set, i, t + 2 * h)
                + 8 * sample_reference(default_set, i, t + h)
                - 8 * sample_reference(default_set, i, t - h)
                + sample_reference(default_set, i, t - 2 * h)
            ) / (12 * h)
            assert sample_reference_rate(default_set, i, t) == pytest.approx(
                fd, abs=1e-6 * scale
            )


def test_index_out_of_range(default_set):
    with pytest.raises(ValueError):
        sample_reference(default_set, 0, 1.0)
    with pytest.raises(ValueError):
        sample_reference_rate(default_set, 4, 1.0)


def test_short_duration_has_no_switches(default_set, default_switch_params):
    for seed in range(5):
        trace = build_switch_schedule(default_set, default_switch_params, 0.5, seed)
        assert trace.switches == ()


def test_degenerate_set_switches_at_dwell_spacing(default_config, default_switch_params):
    rs = zero_phase_set(default_config)
    trace = build_switch_schedule(rs, default_switch_params, 90.0, seed=3)
    assert len(trace.switches) > 0
    times = [t for t, _ in trace.switches]
    gaps = np.diff([0.0] + times)
    assert (gaps >= default_switch_params.min_dwell - 1e-12).all()


def test_schedule_deterministic(default_set, default_switch_params):
    a = build_switch_schedule(default_set, default_switch_params, 90.0, seed=11)
    b = build_switch_schedule(default_set, default_switch_params, 90.0, seed=11)
    assert a == b


def test_schedule_switch_conditions_hold(default_config, default_switch_params):
    # every generated switch satisfies the position/velocity/dwell/index rules
    p = default_switch_params
    total = 0
    for seed in range(40):
        rs = make_reference_set(default_config, seed)
        trace = build_switch_schedule(rs, p, 90.0, seed=seed + 1000)
        prev_t, prev_i = 0.0, trace.initial_index
        for t, i in trace.switches:
            assert i != prev_i
            assert t - prev_t >= p.min_dwell - 1e-12
            dp = sample_reference(rs, prev_i, t) - sample_reference(rs, i, t)
            dv = sample_reference_rate(rs, prev_i, t) - sample_reference_rate(rs, i, t)
            assert abs(dp) < p.eps_pos
            assert abs(dv) < p.eps_vel
            prev_t, prev_i = t, i
        total += len(trace.switches)
    assert total >= 1000


def test_nonpositive_duration_rejected(default_set, default_switch_params):
    with pytest.raises(ValueError):
        build_switch_schedule(default_set, default_switch_params, 0.0, seed=1)


def test_active_index_basics():
    trace = ActiveTargetTrace(initial_index=1, switches=((4.04, 2),), duration=20.0)
    assert active_index(trace, 0.0) == 1
    assert active_index(trace, 4.0) == 1
    assert active_index(trace, 4.04) == 2  # right-continuous at the switch
    assert active_index(trace, 5.0) == 2
    with pytest.raises(ValueError):
        active_index(trace, 25.0)
    with pytest.raises(ValueError):
        active_index(trace, -0.1)


def test_active_index_series_matches_scalar():
    trace = ActiveTargetTrace(
        initial_index=1, switches=((4.04, 2), (8.84, 3), (10.5, 1)), duration=15.0
    )
    times = np.arange(0.0, 15.0, 0.01)
    series = active_index_series(trace, times)
    scalar = np.array([active_index(trace, t) for t in times])
    assert np.array_equal(series, scalar)


def test_trace_invariants_enforced():
    with pytest.raises(ConfigError):
        ActiveTargetTrace(initial_index=1, switches=((2.0, 1),), duration=10.0)
    with pytest.raises(ConfigError):
        ActiveTargetTrace(initial_index=1, switches=((5.0, 2), (3.0, 1)), duration=10.0)
    with pytest.raises(ConfigError):
        ActiveTargetTrace(initial_index=1, switches=((12.0, 2),), duration=10.0)


def test_reference_matrix_shape(default_set):
    t = np.linspace(0, 1, 11)
    assert reference_matrix(default_set, t).shape == (3, 11)
