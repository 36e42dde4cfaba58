"""
Network topologies and channel realizations.

Draws BS and user positions, builds direct, BS-to-IRS and IRS-to-user
channels from a distance path loss with log-normal shadowing and Rayleigh
fading, and composes the effective channel seen by each user.
"""
"""
Copyright (C) 2025 Yogesh Wadadekar

This program is free software: you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation, either version 3 of the License, or
(at your option) any later version.

This program is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
GNU General Public License for more details.

You should have received a copy of the GNU General Public License
along with this program. If not, see <https://www.gnu.org/licenses/>.
"""


import hashlib
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from core.config import SystemConfig
from utils.error_handling import ValidationError
from utils.units import db_to_linear


logger = logging.getLogger(__name__)

UNIT_MODULUS_TOL = 1e-9

FadingSampler = Callable[[np.random.Generator, Tuple[int, ...]], np.ndarray]


def _frozen(array, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Topology:
    """Node positions in metres."""
    bs_positions: np.ndarray
    user_positions: np.ndarray
    irs_position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'bs_positions', _frozen(self.bs_positions, float).reshape(-1, 2))
        object.__setattr__(self, 'user_positions', _frozen(self.user_positions, float).reshape(-1, 2))
        object.__setattr__(self, 'irs_position', _frozen(self.irs_position, float).reshape(2))


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """All channel coefficients of one drop.

    Shapes: direct (K, N*L), bs_to_irs (N*L, R), irs_to_user (K, R) and
    cascade (K, N*L, R) with cascade[k] = bs_to_irs @ diag(irs_to_user[k]).
    """
    direct: np.ndarray
    bs_to_irs: np.ndarray
    irs_to_user: np.ndarray
    cascade: np.ndarray
    noise_power_w: float

    def __post_init__(self):
        for name in ('direct', 'bs_to_irs', 'irs_to_user', 'cascade'):
            object.__setattr__(self, name, _frozen(getattr(self, name), complex))
        K, NL = self.direct.shape
        if self.bs_to_irs.shape[0] != NL:
            raise ValidationError(f"bs_to_irs has {self.bs_to_irs.shape[0]} rows, expected {NL}")
        R = self.bs_to_irs.shape[1]
        if self.irs_to_user.shape != (K, R):
            raise ValidationError(f"irs_to_user shape {self.irs_to_user.shape}, expected {(K, R)}")
        if self.cascade.shape != (K, NL, R):
            raise ValidationError(f"cascade shape {self.cascade.shape}, expected {(K, NL, R)}")
        if not self.noise_power_w > 0:
            raise ValidationError(f"noise_power_w ({self.noise_power_w}) must be positive")
        for name in ('direct', 'bs_to_irs', 'irs_to_user', 'cascade'):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"Channel {name} contains non-finite values")
        object.__setattr__(self, 'noise_power_w', float(self.noise_power_w))

    @classmethod
    def from_parts(cls, direct: np.ndarray, bs_to_irs: np.ndarray,
                   irs_to_user: np.ndarray, noise_power_w: float) -> 'ChannelSet':
        """Build a ChannelSet and compose the cascade matrices."""
        direct = np.atleast_2d(np.asarray(direct, dtype=complex))
        bs_to_irs = np.asarray(bs_to_irs, dtype=complex)
        irs_to_user = np.atleast_2d(np.asarray(irs_to_user, dtype=complex))
        if bs_to_irs.ndim != 2 or irs_to_user.shape[1] != bs_to_irs.shape[1]:
            raise ValidationError(
                f"Reflect dimension mismatch: bs_to_irs {bs_to_irs.shape}, "
                f"irs_to_user {irs_to_user.shape}")
        cascade = bs_to_irs[None, :, :] * irs_to_user[:, None, :]
        return cls(direct, bs_to_irs, irs_to_user, cascade, noise_power_w)

    @property
    def n_users(self) -> int:
        return self.direct.shape[0]

    @property
    def n_tx(self) -> int:
        return self.direct.shape[1]

    @property
    def n_reflect(self) -> int:
        return self.bs_to_irs.shape[1]

    def without_irs(self) -> 'ChannelSet':
        """Same drop with every cascaded path removed."""
        return ChannelSet.from_parts(self.direct, np.zeros_like(self.bs_to_irs),
                                     self.irs_to_user, self.noise_power_w)

    def fingerprint(self) -> str:
        """Short hash identifying the channel draw."""
        digest = hashlib.md5()
        for array in (self.direct, self.bs_to_irs, self.irs_to_user):
            digest.update(np.ascontiguousarray(array).tobytes())
        digest.update(np.float64(self.noise_power_w).tobytes())
        return digest.hexdigest()[:12]


@dataclass(frozen=True, eq=False)
class PhaseShift:
    """Unit-modulus IRS reflection vector."""
    v: np.ndarray

    def __post_init__(self):
        v = _frozen(self.v, complex)
        if v.ndim != 1:
            raise ValidationError(f"Phase shift must be a vector, got shape {v.shape}")
        if v.size and np.max(np.abs(np.abs(v) - 1.0)) > UNIT_MODULUS_TOL:
            raise ValidationError("Phase shift entries must have unit modulus")
        object.__setattr__(self, 'v', v)

    @classmethod
    def ones(cls, n_reflect: int) -> 'PhaseShift':
        return cls(np.ones(n_reflect, dtype=complex))

    @classmethod
    def from_angles(cls, theta) -> 'PhaseShift':
        return cls(np.exp(1j * np.asarray(theta, dtype=float)))

    @classmethod
    def project(cls, x) -> 'PhaseShift':
        """Elementwise phase of x; zero entries map to phase 0."""
        x = np.asarray(x, dtype=complex)
        return cls.from_angles(np.angle(x))

    @property
    def angles(self) -> np.ndarray:
        return np.angle(self.v)

    def extended(self) -> np.ndarray:
        """The lifted vector [v; 1]."""
        return np.append(self.v, 1.0 + 0j)

    def __len__(self) -> int:
        return self.v.size


def sample_topology(config: SystemConfig, rng: np.random.Generator) -> Topology:
    """Draw BS and user positions uniformly over the square area.

    Args:
        config: System parameters
        rng: Seeded random source

    Returns:
        Topology with the IRS at the centre
    """
    half = config.area_halfwidth_m
    bs = rng.uniform(-half, half, size=(config.n_bs, 2))
    users = rng.uniform(-half, half, size=(config.n_users, 2))
    return Topology(bs, users, np.zeros(2))


def path_loss_db(distance_km, min_distance_km: Optional[float] = 0.001):
    """Distance path loss 148.1 + 37.6 log10(d[km]) in dB.

    Args:
        distance_km: Distance (scalar or array) in kilometres
        min_distance_km: Distances below this value are clamped to it; None disables clamping

    Returns:
        Path loss in dB, scalar for scalar input

    Raises:
        ValidationError: If a distance is negative, NaN, or zero after clamping
    """
    d = np.asarray(distance_km, dtype=float)
    if np.any(np.isnan(d)) or np.any(d < 0):
        raise ValidationError(f"Distances must be non-negative, got {distance_km}")
    if min_distance_km is not None:
        d = np.maximum(d, min_distance_km)
    if np.any(d <= 0):
        raise ValidationError(f"Distance must be positive after clamping, got {distance_km}")
    loss = 148.1 + 37.6 * np.log10(d)
    return float(loss) if loss.ndim == 0 else loss


def complex_gaussian(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian samples (polar method)."""
    u1 = rng.random(shape)
    u2 = rng.random(shape)
    radius = np.sqrt(-np.log1p(-u1))
    return radius * np.exp(2j * np.pi * u2)


def _distance_km(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.norm(a[..., :] - b, axis=-1) / 1000.0


def sample_channels(config: SystemConfig, topology: Topology, rng: np.random.Generator,
                    fading: Optional[FadingSampler] = None) -> ChannelSet:
    """Draw one channel realization for a topology.

    Every coefficient is sqrt(10^(-(PL + S)/10)) times a fading draw, with
    one shadowing value S per transmitter-receiver link. Draw order is
    shadowing (BS-user, BS-IRS, IRS-user) then fading (direct, BS-IRS,
    IRS-user).

    Args:
        config: System parameters
        topology: Node positions
        rng: Seeded random source
        fading: Optional replacement for the Rayleigh sampler

    Returns:
        ChannelSet with composed cascade matrices
    """
    fading = fading or complex_gaussian
    N, L, K, R = config.n_bs, config.antennas_per_bs, config.n_users, config.n_reflect
    bs, users, irs = topology.bs_positions, topology.user_positions, topology.irs_position

    d_bu = _distance_km(bs[:, None, :], users[None, :, :])          # (N, K)
    d_bi = _distance_km(bs, irs)                                     # (N,)
    d_iu = _distance_km(users, irs)                                  # (K,)

    std = config.shadowing_std_db
    shadow_bu = std * rng.standard_normal((N, K))
    shadow_bi = std * rng.standard_normal(N)
    shadow_iu = std * rng.standard_normal(K)

    min_km = config.min_distance_km
    amp_bu = np.sqrt(db_to_linear(-(path_loss_db(d_bu, min_km) + shadow_bu)))
    amp_bi = np.sqrt(db_to_linear(-(path_loss_db(d_bi, min_km) + shadow_bi)))
    amp_iu = np.sqrt(db_to_linear(-(path_loss_db(d_iu, min_km) + shadow_iu)))

    fade_direct = np.asarray(fading(rng, (K, N, L)), dtype=complex)
    fade_bi = np.asarray(fading(rng, (N, L, R)), dtype=complex)
    fade_iu = np.asarray(fading(rng, (K, R)), dtype=complex)

    direct = (amp_bu.T[:, :, None] * fade_direct).reshape(K, N * L)
    bs_to_irs = (amp_bi[:, None, None] * fade_bi).reshape(N * L, R)
    irs_to_user = amp_iu[:, None] * fade_iu

    channels = ChannelSet.from_parts(direct, bs_to_irs, irs_to_user, config.noise_power_w)
    logger.debug("Sampled channels %s (K=%d, NL=%d, R=%d)", channels.fingerprint(), K, N * L, R)
    return channels


def sample_drop(config: SystemConfig, rng: np.random.Generator) -> Tuple[Topology, ChannelSet]:
    """Draw a topology and its channels from one random source."""
    topology = sample_topology(config, rng)
    return topology, sample_channels(config, topology, rng)


def _as_vector(v: Union[PhaseShift, np.ndarray]) -> np.ndarray:
    return v.v if isinstance(v, PhaseShift) else np.asarray(v, dtype=complex)


def effective_channel(channels: ChannelSet, k: int, v: Union[PhaseShift, np.ndarray]) -> np.ndarray:
    """Effective channel h_k + H_k v of user k.

    Raises:
        ValidationError: If k is out of range or v has the wrong length
    """
    vec = _as_vector(v)
    if not 0 <= k < channels.n_users:
        raise ValidationError(f"User index {k} out of range 0..{channels.n_users - 1}")
    if vec.shape != (channels.n_reflect,):
        raise ValidationError(f"Phase vector shape {vec.shape}, expected ({channels.n_reflect},)")
    return channels.direct[k] + channels.cascade[k] @ vec


def effective_channels(channels: ChannelSet, v: Union[PhaseShift, np.ndarray]) -> np.ndarray:
    """Effective channels of all users stacked as rows (K, N*L)."""
    vec = _as_vector(v)
    if vec.shape != (channels.n_reflect,):
        raise ValidationError(f"Phase vector shape {vec.shape}, expected ({channels.n_reflect},)")
    return channels.direct + channels.cascade @ vec
