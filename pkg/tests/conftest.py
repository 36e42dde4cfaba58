"""Shared fixtures: small deterministic systems and synthetic channels."""

import numpy as np
import pytest

from core.config import SystemConfig
from core.rs_core import BeamformerSet
from core.scenario import ChannelSet, complex_gaussian


@pytest.fixture
def rng():
    return np.random.default_rng(20250723)


@pytest.fixture
def make_channels():
    """Factory of unit-scale Rayleigh channels with a chosen noise power."""
    def factory(rng, n_users, n_tx, n_reflect, noise=1.0, irs_gain=1.0):
        direct = complex_gaussian(rng, (n_users, n_tx))
        bs_to_irs = np.sqrt(irs_gain) * complex_gaussian(rng, (n_tx, n_reflect))
        irs_to_user = complex_gaussian(rng, (n_users, n_reflect))
        return ChannelSet.from_parts(direct, bs_to_irs, irs_to_user, noise)
    return factory


@pytest.fixture
def make_beamformers():
    """Factory of random full-cluster beamformer sets."""
    def factory(rng, n_users, n_tx, antennas_per_bs=None, common=True):
        private = complex_gaussian(rng, (n_users, n_tx))
        shared = complex_gaussian(rng, (n_users, n_tx)) if common else None
        return BeamformerSet.create(private, shared, antennas_per_bs)
    return factory


@pytest.fixture
def small_config():
    """Two cells, three users, four reflecting elements."""
    return SystemConfig(
        n_bs=2, antennas_per_bs=2, n_users=3, n_reflect=4,
        qos_min_bps=(2e6,), n_randomizations=10,
        max_outer_iters=4, max_sca_iters=12,
    )


@pytest.fixture
def single_user_config():
    return SystemConfig(
        n_bs=1, antennas_per_bs=2, n_users=1, n_reflect=1,
        qos_min_bps=(4e6,), decode_group_max=1,
        max_outer_iters=3, max_sca_iters=10,
    )
