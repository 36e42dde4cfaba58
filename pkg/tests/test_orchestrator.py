"""Alternating optimization and the baseline schemes."""

import numpy as np
import pytest

from core.beamform_sca import MODE_TIN
from core.config import SystemConfig
from core.orchestrator import (SCHEME_TIN_NOIRS, alternating_optimize, run_no_irs_rs,
                               run_scheme, run_tin)
from core.rs_core import check_qos
from core.scenario import ChannelSet, PhaseShift, sample_drop
from utils.error_handling import ValidationError


def _closed_form(config, gain, noise):
    return noise * (2 ** (config.qos_vector()[0] / config.bandwidth_hz) - 1) / gain


def test_single_user_without_irs_hits_closed_form(rng, single_user_config):
    _, channels = sample_drop(single_user_config, rng)
    result = run_no_irs_rs(channels, single_user_config, rng)
    gain = np.linalg.norm(channels.direct[0]) ** 2
    assert result.feasible
    assert result.phase is None
    assert result.weighted_power_w == pytest.approx(
        _closed_form(single_user_config, gain, channels.noise_power_w), rel=1e-2)


def test_single_user_tin_matches_rate_splitting(rng, single_user_config):
    _, channels = sample_drop(single_user_config, rng)
    rs = run_no_irs_rs(channels, single_user_config, rng)
    tin = run_tin(channels, single_user_config, False, rng)
    assert tin.scheme == SCHEME_TIN_NOIRS
    assert tin.weighted_power_w == pytest.approx(rs.weighted_power_w, rel=1e-2)


def test_zero_rate_floor_needs_no_power(rng, small_config, make_channels):
    config = small_config.with_overrides(qos_min_bps=(0.0,))
    result = alternating_optimize(make_channels(rng, 3, 4, 4), config, rng)
    assert result.feasible
    assert result.weighted_power_w == 0.0
    assert result.power_trajectory == [0.0]


def test_outer_trajectory_never_increases(rng, small_config, make_channels):
    result = alternating_optimize(make_channels(rng, 3, 4, 4), small_config, rng)
    trajectory = np.array(result.power_trajectory)
    assert trajectory.size == result.outer_iterations >= 1
    assert np.all(trajectory[1:] <= trajectory[:-1] * (1 + 1e-6))
    assert result.phase is not None and len(result.phase) == 4


def test_feasible_result_meets_rate_floors(rng, small_config, make_channels):
    channels = make_channels(rng, 3, 4, 4)
    for scheme in ("rs_irs", "rs_noirs", "tin_irs", "tin_noirs"):
        result = run_scheme(scheme, channels, small_config, np.random.default_rng(1))
        assert result.scheme == scheme
        assert result.feasible
        v = result.phase if result.phase is not None else PhaseShift.ones(4)
        evaluated = channels if result.phase is not None else channels.without_irs()
        assert check_qos(result.beamformers, v, evaluated, result.structure, small_config).all_passed


def test_tin_never_uses_common_streams(rng, small_config, make_channels):
    channels = make_channels(rng, 3, 4, 4)
    for with_irs in (True, False):
        result = run_tin(channels, small_config, with_irs, rng)
        assert result.common_power_w == 0.0
        assert all(len(d) == 1 for d in result.structure.decoders)


def test_zero_cascade_matches_run_without_irs(rng, small_config, make_channels):
    channels = make_channels(rng, 3, 4, 4)
    blocked = ChannelSet.from_parts(channels.direct, np.zeros_like(channels.bs_to_irs),
                                    channels.irs_to_user, channels.noise_power_w)
    with_blocked = run_tin(blocked, small_config, True, np.random.default_rng(2))
    without = run_tin(channels, small_config, False, np.random.default_rng(2))
    assert with_blocked.outer_iterations == 1
    assert with_blocked.weighted_power_w == pytest.approx(without.weighted_power_w, rel=1e-9)


def test_no_irs_baseline_is_phase_free_run(rng, small_config, make_channels):
    channels = make_channels(rng, 3, 4, 4)
    baseline = run_no_irs_rs(channels, small_config, np.random.default_rng(3))
    direct = alternating_optimize(channels.without_irs(), small_config, np.random.default_rng(4),
                                  phase_enabled=False)
    assert baseline.weighted_power_w == pytest.approx(direct.weighted_power_w, rel=1e-12)
    assert baseline.outer_iterations == 1


def test_runs_are_deterministic(small_config, make_channels):
    channels = make_channels(np.random.default_rng(9), 3, 4, 4)
    a = alternating_optimize(channels, small_config, np.random.default_rng(5))
    b = alternating_optimize(channels, small_config, np.random.default_rng(5))
    assert a.power_trajectory == b.power_trajectory
    np.testing.assert_array_equal(a.phase.v, b.phase.v)


def test_orthogonal_users_decouple():
    config = SystemConfig(n_bs=2, antennas_per_bs=2, n_users=2, n_reflect=1, qos_min_bps=(4e6,))
    direct = np.array([[1.0 + 0.5j, -0.3j, 0, 0], [0, 0, 0.8, 0.4 - 0.2j]])
    channels = ChannelSet.from_parts(direct, np.zeros((4, 1)), np.ones((2, 1)), 1.0)
    result = run_tin(channels, config, False, np.random.default_rng(0))
    expected = sum(_closed_form(config, np.linalg.norm(h) ** 2, 1.0) for h in direct)
    assert result.feasible
    assert result.weighted_power_w == pytest.approx(expected, rel=1e-2)


def test_unknown_scheme_rejected(rng, small_config, make_channels):
    with pytest.raises(ValidationError):
        run_scheme("noma", make_channels(rng, 3, 4, 4), small_config, rng)


def test_tin_mode_through_alternating_optimize(rng, small_config, make_channels):
    result = alternating_optimize(make_channels(rng, 3, 4, 4), small_config, rng, mode=MODE_TIN)
    assert result.common_power_w == 0.0
    assert result.feasible


@pytest.mark.slow
def test_descent_over_random_drops(small_config):
    for drop in range(20):
        rng = np.random.default_rng([11, drop])
        _, channels = sample_drop(small_config, rng)
        result = alternating_optimize(channels, small_config, rng)
        trajectory = np.array(result.power_trajectory)
        assert np.all(trajectory[1:] <= trajectory[:-1] * (1 + 1e-6))
        for trace in result.sca_traces:
            objectives = np.array(trace.objectives)
            assert np.all(objectives[1:] <= objectives[:-1] * (1 + 1e-6))


@pytest.mark.slow
def test_feasibility_rate_at_moderate_floors():
    config = SystemConfig(qos_min_bps=(4e6,), max_outer_iters=4)
    feasible = 0
    for drop in range(50):
        rng = np.random.default_rng([12, drop])
        _, channels = sample_drop(config, rng)
        result = alternating_optimize(channels, config, rng)
        if result.feasible:
            v = result.phase if result.phase is not None else PhaseShift.ones(config.n_reflect)
            report = check_qos(result.beamformers, v, channels, result.structure, config)
            assert report.all_passed
            feasible += 1
    assert feasible >= 45
