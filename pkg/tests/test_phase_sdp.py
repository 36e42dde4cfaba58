"""Lifting, the penalized phase program, randomization and candidate selection."""

import numpy as np
import pytest
from scipy.linalg import null_space

from core.beamform_sca import MODE_TIN, init_mrc
from core.config import SystemConfig
from core.conic import ConeKind, HermitianEmbedding
from core.phase_sdp import (build_lifting, build_sdp, eta_weights, gaussian_randomize,
                            optimize_phase, principal_candidate, select_phase_shift,
                            solve_sdp, spectral_subgradient)
from core.rs_core import (BeamformerSet, DecodingStructure, RateAllocation,
                          build_decoding_structure, sinr_table, sum_rate)
from core.scenario import ChannelSet, PhaseShift, complex_gaussian, effective_channel
from utils.error_handling import ValidationError


def _lifted(v: PhaseShift) -> np.ndarray:
    x = v.extended()
    return np.outer(x, x.conj())


def _sdp_inputs(rng, config, make_channels, scale=0.99):
    channels = make_channels(rng, 3, 4, 4)
    v = PhaseShift.from_angles(rng.uniform(0, 2 * np.pi, 4))
    structure = build_decoding_structure(channels, v, 2)
    point = init_mrc(channels, v, structure, config)
    table = sinr_table(point.beamformers, v, channels, structure)
    targets = RateAllocation(np.zeros(3), np.zeros(3), scale * table.private, scale * table.common_worst())
    return channels, v, structure, point.beamformers, targets


def test_lifting_matches_effective_channel(rng, make_channels, make_beamformers):
    channels = make_channels(rng, 3, 4, 5)
    bf = make_beamformers(rng, 3, 4)
    lifting = build_lifting(channels, bf)
    for _ in range(100):
        v = complex_gaussian(rng, (5,))
        o = 'p' if rng.random() < 0.5 else 'c'
        k, i = rng.integers(3, size=2)
        w = bf.private[i] if o == 'p' else bf.common[i]
        exact = abs(np.vdot(effective_channel(channels, k, v), w)) ** 2
        assert lifting.received_power(o, k, i, v) == pytest.approx(exact, rel=1e-9, abs=1e-12)


def test_lifting_matrices_hermitian_with_zero_corner(rng, make_channels, make_beamformers):
    lifting = build_lifting(make_channels(rng, 2, 3, 3), make_beamformers(rng, 2, 3))
    for o in ('p', 'c'):
        M = lifting.M[o]
        np.testing.assert_allclose(M, np.conj(np.swapaxes(M, -1, -2)), atol=1e-14)
        assert not np.any(M[:, :, -1, -1])
    assert lifting.order == 4


def test_zero_beamformers_give_zero_lifting(rng, make_channels):
    lifting = build_lifting(make_channels(rng, 2, 3, 3), BeamformerSet.zeros(2, 1, 3))
    for o in ('p', 'c'):
        assert not np.any(lifting.b[o]) and not np.any(lifting.a[o]) and not np.any(lifting.M[o])


def test_lifting_dimension_mismatch(rng, make_channels, make_beamformers):
    with pytest.raises(ValidationError):
        build_lifting(make_channels(rng, 2, 3, 3), make_beamformers(rng, 2, 4))


def test_eta_weights():
    bf = BeamformerSet.create([[2.0, 0.0], [1.0, 0.0]])
    eta_p, eta_c = eta_weights(bf)
    np.testing.assert_allclose(eta_p, [1.0, 0.25])
    np.testing.assert_allclose(eta_c, [0.0, 0.0])
    scaled_p, _ = eta_weights(bf.replace(private=3.0 * bf.private))
    np.testing.assert_allclose(scaled_p, eta_p)
    with pytest.raises(ValidationError):
        eta_weights(BeamformerSet.zeros(2, 1, 2))


def test_spectral_subgradient():
    np.testing.assert_allclose(spectral_subgradient(np.diag([3.0, 1.0])), np.diag([1.0, 0.0]), atol=1e-12)
    v = PhaseShift.from_angles([0.3, 2.0, -1.1])
    V = _lifted(v)
    np.testing.assert_allclose(spectral_subgradient(V), V / 4.0, atol=1e-12)


def test_rank_penalty_and_its_linearization(rng):
    rank_one = _lifted(PhaseShift.from_angles(rng.uniform(0, 2 * np.pi, 3)))
    assert np.trace(rank_one).real - np.linalg.eigvalsh(rank_one)[-1] == pytest.approx(0.0, abs=1e-12)

    X = complex_gaussian(rng, (4, 2))
    V = X @ X.conj().T
    V = V / np.sqrt(np.outer(np.diag(V).real, np.diag(V).real))
    gap = np.trace(V).real - np.linalg.eigvalsh(V)[-1]
    assert gap > 1e-6

    for _ in range(20):
        Y = complex_gaussian(rng, (4, 4))
        V0 = Y @ Y.conj().T
        E = spectral_subgradient(V0)
        linear = np.trace(V).real - np.trace(E @ V).real
        assert linear >= gap - 1e-12


def test_sdp_structure(rng, small_config, make_channels):
    channels, v, structure, bf, targets = _sdp_inputs(rng, small_config, make_channels)
    program = build_sdp(build_lifting(channels, bf), targets, structure, eta_weights(bf),
                        _lifted(v), 0.9, channels.noise_power_w)
    assert program.sense == "maximize"
    counts = program.cone_counts()
    assert counts[ConeKind.PSD] == 1
    psd = [con for con in program.constraints if con.kind is ConeKind.PSD][0]
    assert psd.order == 10
    diagonal = [con for con in program.constraints if con.label == "unit_diagonal"][0]
    assert diagonal.size == 5
    residuals = [con for con in program.constraints if con.label == "sinr_residual"][0]
    assert residuals.size == 3 + sum(len(structure.decoders[k]) for k in range(3))

    with pytest.raises(ValidationError):
        build_sdp(build_lifting(channels, bf), targets, structure, eta_weights(bf),
                  _lifted(v), 0.0, channels.noise_power_w)


def test_no_penalty_when_tradeoff_is_one(rng, small_config, make_channels):
    channels, v, structure, bf, targets = _sdp_inputs(rng, small_config, make_channels)
    program = build_sdp(build_lifting(channels, bf), targets, structure, eta_weights(bf),
                        _lifted(v), 1.0, channels.noise_power_w)
    assert not np.any(program.c[program.block('theta')])
    assert program.constant == 0.0


def test_current_phase_is_feasible_for_sdp(rng, small_config, make_channels):
    channels, v, structure, bf, targets = _sdp_inputs(rng, small_config, make_channels)
    V0 = _lifted(v)
    program = build_sdp(build_lifting(channels, bf), targets, structure, eta_weights(bf),
                        V0, 0.9, channels.noise_power_w)
    x = np.zeros(program.n_vars)
    x[program.block('theta')] = HermitianEmbedding(5).to_params(V0)
    assert program.max_violation(x) <= 1e-9
    assert program.objective_value(x) == pytest.approx(0.0, abs=1e-9)

    solution = solve_sdp(program)
    assert solution.V is not None
    assert solution.objective >= -1e-6
    np.testing.assert_allclose(np.diag(solution.V).real, 1.0, atol=1e-6)


def test_tin_sdp_pins_common_residuals(rng, small_config, make_channels):
    channels = make_channels(rng, 3, 4, 4)
    v = PhaseShift.ones(4)
    structure = DecodingStructure.private_only(3)
    point = init_mrc(channels, v, structure, small_config, MODE_TIN)
    table = sinr_table(point.beamformers, v, channels, structure)
    targets = RateAllocation(np.zeros(3), np.zeros(3), 0.99 * table.private, np.zeros(3))
    program = build_sdp(build_lifting(channels, point.beamformers), targets, structure,
                        eta_weights(point.beamformers), _lifted(v), 0.9, 1.0, MODE_TIN)
    residuals = [con for con in program.constraints if con.label == "sinr_residual"][0]
    assert residuals.size == 3
    assert [con.label for con in program.constraints].count("no_common") == 1


def test_rank_one_randomization_recovers_phase(rng):
    v = PhaseShift.from_angles(rng.uniform(0, 2 * np.pi, 6))
    for candidate in gaussian_randomize(_lifted(v), 5, rng):
        np.testing.assert_allclose(candidate.v, v.v, atol=1e-9)
    np.testing.assert_allclose(principal_candidate(_lifted(v)).v, v.v, atol=1e-9)


def test_randomized_candidates_are_unit_modulus(rng):
    X = complex_gaussian(rng, (5, 3))
    V = X @ X.conj().T
    candidates = gaussian_randomize(V, 25, rng)
    assert len(candidates) == 25
    for candidate in candidates:
        np.testing.assert_allclose(np.abs(candidate.v), 1.0, atol=1e-12)


def _single_user_setup(rng, config, make_channels, target):
    channels = make_channels(rng, 1, 2, 1)
    bf = BeamformerSet.create(complex_gaussian(rng, (1, 2)))
    targets = RateAllocation([0.0], [0.0], [target], [0.0])
    return channels, bf, targets, DecodingStructure.private_only(1)


def test_select_phase_shift(rng, single_user_config, make_channels):
    channels, bf, targets, structure = _single_user_setup(rng, single_user_config, make_channels, 1e-3)
    assert select_phase_shift([], bf, targets, channels, structure, single_user_config) is None

    grid = [PhaseShift.from_angles([a]) for a in np.linspace(0, 2 * np.pi, 8, endpoint=False)]
    only = grid[3]
    assert select_phase_shift([only], bf, targets, channels, structure, single_user_config) is only

    rates = [sum_rate(bf, v, channels, structure, single_user_config.bandwidth_hz) for v in grid]
    chosen = select_phase_shift(grid, bf, targets, channels, structure, single_user_config)
    assert chosen is grid[int(np.argmax(rates))]

    impossible = RateAllocation([0.0], [0.0], [1e9], [0.0])
    assert select_phase_shift(grid, bf, impossible, channels, structure, single_user_config) is None


def test_single_element_matches_grid_search(single_user_config, make_channels):
    config = single_user_config.with_overrides(penalty_tradeoff=1.0, n_randomizations=10)
    rng = np.random.default_rng(7)
    for _ in range(10):
        channels, bf, targets, structure = _single_user_setup(rng, config, make_channels, 1e-3)
        grid = np.linspace(0, 2 * np.pi, 3600, endpoint=False)
        best = max(sum_rate(bf, PhaseShift.from_angles([a]), channels, structure, config.bandwidth_hz)
                   for a in grid)
        chosen = optimize_phase(channels, PhaseShift.ones(1), bf, targets, structure, config, rng)
        assert chosen is not None
        assert sum_rate(bf, chosen, channels, structure, config.bandwidth_hz) >= 0.98 * best


def test_two_user_single_element_matches_grid_search(make_channels):
    config = SystemConfig(n_bs=1, antennas_per_bs=3, n_users=2, n_reflect=1, decode_group_max=1,
                          penalty_tradeoff=1.0, n_randomizations=10)
    rng = np.random.default_rng(11)
    structure = DecodingStructure.private_only(2)
    targets = RateAllocation(np.zeros(2), np.zeros(2), np.zeros(2), np.zeros(2))
    grid = np.linspace(0, 2 * np.pi, 3600, endpoint=False)
    for _ in range(10):
        channels = make_channels(rng, 2, 3, 1)
        # second user sees no reflected path but hears the first user's stream
        channels = ChannelSet.from_parts(channels.direct, channels.bs_to_irs,
                                         channels.irs_to_user * np.array([[1.0], [0.0]]),
                                         channels.noise_power_w)
        span = np.array([effective_channel(channels, 0, PhaseShift.from_angles([a])) for a in (0.0, np.pi)])
        w2 = null_space(span.conj())[:, 0]
        bf = BeamformerSet.create(np.vstack([complex_gaussian(rng, (1, 3)), w2[None, :]]))
        assert abs(np.vdot(channels.direct[1], bf.private[0])) > 0

        best = max(sum_rate(bf, PhaseShift.from_angles([a]), channels, structure, config.bandwidth_hz)
                   for a in grid)
        chosen = optimize_phase(channels, PhaseShift.ones(1), bf, targets, structure, config, rng)
        assert chosen is not None
        assert sum_rate(bf, chosen, channels, structure, config.bandwidth_hz) >= 0.98 * best
