"""
Rate-splitting core: decoding structure, SINRs, rates and power.

Every optimization stage evaluates candidate beamformers and phase shifts
through the functions in this module.
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


from dataclasses import dataclass
from typing import Dict, FrozenSet, Optional, Sequence, Tuple, Union

import numpy as np

from core.config import SystemConfig
from core.scenario import ChannelSet, PhaseShift, effective_channels
from utils.error_handling import ValidationError


@dataclass(frozen=True, eq=False)
class DecodingStructure:
    """Which users decode which common messages, and in what order.

    decoders[k] is M_k, decoded_by_me[k] is Phi_k, not_decoded_by_me[k] is
    Psi_k, order[k] lists Phi_k with the first entry decoded first, and
    after_sets[(i, k)] holds the users of Phi_i still undecoded when user i
    decodes the common message of k.
    """
    decoders: Tuple[FrozenSet[int], ...]
    decoded_by_me: Tuple[FrozenSet[int], ...]
    not_decoded_by_me: Tuple[FrozenSet[int], ...]
    order: Tuple[Tuple[int, ...], ...]
    after_sets: Dict[Tuple[int, int], FrozenSet[int]]

    @property
    def n_users(self) -> int:
        return len(self.order)

    @classmethod
    def from_orders(cls, order: Sequence[Sequence[int]]) -> 'DecodingStructure':
        """Derive every set from the per-user decoding orders.

        Args:
            order: order[k] is the sequence of users whose common messages
                user k decodes, first decoded first; must contain k

        Raises:
            ValidationError: If an order is missing its own user or repeats users
        """
        K = len(order)
        order = tuple(tuple(int(j) for j in seq) for seq in order)
        for k, seq in enumerate(order):
            if k not in seq:
                raise ValidationError(f"User {k} must decode its own common message")
            if len(set(seq)) != len(seq) or any(not 0 <= j < K for j in seq):
                raise ValidationError(f"Invalid decoding order for user {k}: {seq}")
        phi = tuple(frozenset(seq) for seq in order)
        psi = tuple(frozenset(range(K)) - phi[k] for k in range(K))
        decoders = tuple(frozenset(j for j in range(K) if k in phi[j]) for k in range(K))
        after_sets = {}
        for i in range(K):
            for pos, k in enumerate(order[i]):
                after_sets[(i, k)] = frozenset(order[i][pos + 1:])
        return cls(decoders, phi, psi, order, after_sets)

    @classmethod
    def private_only(cls, n_users: int) -> 'DecodingStructure':
        """Structure in which every user decodes only its own common message."""
        return cls.from_orders([(k,) for k in range(n_users)])

    def after(self, i: int, k: int) -> FrozenSet[int]:
        """Omega_{i,k}; raises if user i does not decode the common message of k."""
        try:
            return self.after_sets[(i, k)]
        except KeyError:
            raise ValidationError(f"User {i} does not decode the common message of user {k}")

    def validate(self, max_group: Optional[int] = None) -> bool:
        """Check every structural invariant.

        Raises:
            ValidationError: If an invariant does not hold
        """
        K = self.n_users
        everyone = frozenset(range(K))
        for k in range(K):
            phi, psi = self.decoded_by_me[k], self.not_decoded_by_me[k]
            if phi != frozenset(j for j in range(K) if k in self.decoders[j]):
                raise ValidationError(f"Phi_{k} inconsistent with decoder sets")
            if phi & psi or (phi | psi) != everyone:
                raise ValidationError(f"Phi_{k} and Psi_{k} do not partition the users")
            if k not in self.decoders[k]:
                raise ValidationError(f"User {k} missing from its own decoder set")
            if max_group is not None and len(phi) > max_group:
                raise ValidationError(f"|Phi_{k}| = {len(phi)} exceeds {max_group}")
            if set(self.order[k]) != set(phi) or len(self.order[k]) != len(phi):
                raise ValidationError(f"Order of user {k} is not a permutation of Phi_{k}")
            for pos, j in enumerate(self.order[k]):
                if self.after_sets[(k, j)] != frozenset(self.order[k][pos + 1:]):
                    raise ValidationError(f"Omega_{{{k},{j}}} inconsistent with order")
        return True


def build_decoding_structure(channels: ChannelSet, v: Union[PhaseShift, np.ndarray],
                             D: int) -> DecodingStructure:
    """Group users by effective-channel strength.

    User k decodes its own common message plus those of the D-1 other users
    with the strongest effective channels, strongest decoded first. Ties are
    broken by ascending user index.

    Raises:
        ValidationError: If D < 1
    """
    if D < 1:
        raise ValidationError(f"Decoding group size must be at least 1, got {D}")
    norms = np.linalg.norm(effective_channels(channels, v), axis=1)
    K = norms.size
    ranking = sorted(range(K), key=lambda j: (-norms[j], j))
    orders = []
    for k in range(K):
        others = [j for j in ranking if j != k][:D - 1]
        group = set(others) | {k}
        orders.append([j for j in ranking if j in group])
    return DecodingStructure.from_orders(orders)


@dataclass(frozen=True, eq=False)
class BeamformerSet:
    """Aggregate private and common beamformers, one row per user.

    cluster_private[n] and cluster_common[n] are the users served by BS n;
    the length-L block of BS n is zero for users outside its cluster.
    """
    private: np.ndarray
    common: np.ndarray
    antennas_per_bs: int
    cluster_private: Tuple[FrozenSet[int], ...]
    cluster_common: Tuple[FrozenSet[int], ...]

    def __post_init__(self):
        private = np.array(self.private, dtype=complex, copy=True)
        common = np.array(self.common, dtype=complex, copy=True)
        if private.ndim != 2 or private.shape != common.shape:
            raise ValidationError(f"Beamformer shapes {private.shape} and {common.shape} differ")
        if not (np.all(np.isfinite(private)) and np.all(np.isfinite(common))):
            raise ValidationError("Beamformers contain non-finite values")
        K, NL = private.shape
        L = int(self.antennas_per_bs)
        if L < 1 or NL % L:
            raise ValidationError(f"{NL} antennas do not split into blocks of {L}")
        for name, clusters, array in (('private', self.cluster_private, private),
                                      ('common', self.cluster_common, common)):
            if len(clusters) != NL // L:
                raise ValidationError(f"Expected {NL // L} {name} clusters, got {len(clusters)}")
            mask = cluster_mask(clusters, K, L)
            if np.any(array[~mask] != 0):
                raise ValidationError(f"{name} beamformer nonzero outside its cluster")
        private.setflags(write=False)
        common.setflags(write=False)
        object.__setattr__(self, 'private', private)
        object.__setattr__(self, 'common', common)
        object.__setattr__(self, 'antennas_per_bs', L)
        object.__setattr__(self, 'cluster_private', tuple(frozenset(c) for c in self.cluster_private))
        object.__setattr__(self, 'cluster_common', tuple(frozenset(c) for c in self.cluster_common))

    @classmethod
    def create(cls, private, common=None, antennas_per_bs: Optional[int] = None,
               cluster_private=None, cluster_common=None) -> 'BeamformerSet':
        """Build a set with full clusters unless given otherwise."""
        private = np.atleast_2d(np.asarray(private, dtype=complex))
        common = np.zeros_like(private) if common is None else np.atleast_2d(common)
        K, NL = private.shape
        L = NL if antennas_per_bs is None else antennas_per_bs
        full = tuple(frozenset(range(K)) for _ in range(NL // L))
        return cls(private, common, L,
                   full if cluster_private is None else tuple(cluster_private),
                   full if cluster_common is None else tuple(cluster_common))

    @classmethod
    def zeros(cls, n_users: int, n_bs: int, antennas_per_bs: int,
              cluster_private=None, cluster_common=None) -> 'BeamformerSet':
        blank = np.zeros((n_users, n_bs * antennas_per_bs), dtype=complex)
        return cls.create(blank, blank, antennas_per_bs, cluster_private, cluster_common)

    @property
    def n_users(self) -> int:
        return self.private.shape[0]

    @property
    def n_tx(self) -> int:
        return self.private.shape[1]

    def mask_private(self) -> np.ndarray:
        return cluster_mask(self.cluster_private, self.n_users, self.antennas_per_bs)

    def mask_common(self) -> np.ndarray:
        return cluster_mask(self.cluster_common, self.n_users, self.antennas_per_bs)

    def replace(self, private=None, common=None) -> 'BeamformerSet':
        """New set with the same clusters; entries outside clusters are zeroed."""
        private = self.private if private is None else np.asarray(private, dtype=complex)
        common = self.common if common is None else np.asarray(common, dtype=complex)
        return BeamformerSet(np.where(self.mask_private(), private, 0),
                             np.where(self.mask_common(), common, 0),
                             self.antennas_per_bs, self.cluster_private, self.cluster_common)

    def user_powers(self) -> np.ndarray:
        """Per-user (private, common) squared norms, shape (K, 2)."""
        return np.stack([np.sum(np.abs(self.private) ** 2, axis=1),
                         np.sum(np.abs(self.common) ** 2, axis=1)], axis=1)


def cluster_mask(clusters: Sequence[FrozenSet[int]], n_users: int, antennas_per_bs: int) -> np.ndarray:
    """Boolean (K, N*L) mask of entries allowed to be nonzero."""
    mask = np.zeros((n_users, len(clusters) * antennas_per_bs), dtype=bool)
    for n, served in enumerate(clusters):
        for k in served:
            mask[k, n * antennas_per_bs:(n + 1) * antennas_per_bs] = True
    return mask


@dataclass(frozen=True, eq=False)
class RateAllocation:
    """Per-user rates (bps) and SINR targets of the private and common streams."""
    rate_private: np.ndarray
    rate_common: np.ndarray
    t_private: np.ndarray
    t_common: np.ndarray

    def __post_init__(self):
        for name in ('rate_private', 'rate_common', 't_private', 't_common'):
            value = np.array(getattr(self, name), dtype=float, copy=True).reshape(-1)
            if np.any(~np.isfinite(value)) or np.any(value < 0):
                raise ValidationError(f"{name} must be finite and non-negative")
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @classmethod
    def zeros(cls, n_users: int) -> 'RateAllocation':
        z = np.zeros(n_users)
        return cls(z, z, z, z)


@dataclass(frozen=True, eq=False)
class SinrTable:
    """Private SINRs (K,) and common SINRs (K, K) indexed [decoder i, message k].

    Entries with i outside M_k are NaN.
    """
    private: np.ndarray
    common: np.ndarray

    def common_worst(self) -> np.ndarray:
        """Per message k, the smallest common SINR over its decoders."""
        return np.nanmin(self.common, axis=0)


def gain_matrices(h_eff: np.ndarray, beamformers: BeamformerSet) -> Tuple[np.ndarray, np.ndarray]:
    """Received powers P[i, j] = |h_i^H w_j^p|^2 and C[i, j] = |h_i^H w_j^c|^2."""
    P = np.abs(h_eff.conj() @ beamformers.private.T) ** 2
    C = np.abs(h_eff.conj() @ beamformers.common.T) ** 2
    return P, C


def sinr_table_from_gains(P: np.ndarray, C: np.ndarray, structure: DecodingStructure,
                          noise_power_w: float) -> SinrTable:
    """SINRs of all streams from precomputed gain matrices."""
    K = P.shape[0]
    private = np.empty(K)
    common = np.full((K, K), np.nan)
    total_private = P.sum(axis=1) + noise_power_w
    for k in range(K):
        psi = list(structure.not_decoded_by_me[k])
        interference = total_private[k] - P[k, k] + C[k, psi].sum()
        private[k] = P[k, k] / interference
    for k in range(K):
        for i in structure.decoders[k]:
            psi = list(structure.not_decoded_by_me[i])
            omega = list(structure.after(i, k))
            denominator = total_private[i] + C[i, psi].sum() + C[i, omega].sum()
            common[i, k] = C[i, k] / denominator
    return SinrTable(private, common)


def sinr_table(beamformers: BeamformerSet, v, channels: ChannelSet,
               structure: DecodingStructure) -> SinrTable:
    """All private and common SINRs at phase shift v."""
    h_eff = effective_channels(channels, v)
    P, C = gain_matrices(h_eff, beamformers)
    return sinr_table_from_gains(P, C, structure, channels.noise_power_w)


def sinr_private(beamformers: BeamformerSet, v, channels: ChannelSet,
                 structure: DecodingStructure, k: int) -> float:
    """SINR of the private stream of user k."""
    return float(sinr_table(beamformers, v, channels, structure).private[k])


def sinr_common(beamformers: BeamformerSet, v, channels: ChannelSet,
                structure: DecodingStructure, i: int, k: int) -> float:
    """SINR of the common message of user k at decoder i.

    Raises:
        ValidationError: If user i is not in M_k
    """
    if i not in structure.decoders[k]:
        raise ValidationError(f"User {i} is not a decoder of the common message of user {k}")
    return float(sinr_table(beamformers, v, channels, structure).common[i, k])


def total_power(beamformers: BeamformerSet, weights=None) -> float:
    """Weighted total transmit power sum_k alpha_k (|w_k^p|^2 + |w_k^c|^2) in W."""
    per_user = beamformers.user_powers().sum(axis=1)
    if weights is None:
        return float(per_user.sum())
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise ValidationError("Power weights must be positive")
    return float(np.dot(weights, per_user))


def rates_from_sinrs(table: SinrTable, bandwidth_hz: float) -> np.ndarray:
    """QoS-relevant rate of each user in bps."""
    private = np.log2(1.0 + table.private)
    common = np.log2(1.0 + table.common_worst())
    return bandwidth_hz * (private + common)


def achieved_rate(beamformers: BeamformerSet, v, channels: ChannelSet,
                  structure: DecodingStructure, k: int, bandwidth_hz: float) -> float:
    """Rate of user k: private rate plus the common rate its worst decoder supports."""
    return float(achieved_rates(beamformers, v, channels, structure, bandwidth_hz)[k])


def achieved_rates(beamformers: BeamformerSet, v, channels: ChannelSet,
                   structure: DecodingStructure, bandwidth_hz: float) -> np.ndarray:
    """Rates of all users in bps."""
    return rates_from_sinrs(sinr_table(beamformers, v, channels, structure), bandwidth_hz)


def sum_rate(beamformers: BeamformerSet, v, channels: ChannelSet,
             structure: DecodingStructure, bandwidth_hz: float) -> float:
    return float(achieved_rates(beamformers, v, channels, structure, bandwidth_hz).sum())


@dataclass(frozen=True, eq=False)
class QosReport:
    """Per-user QoS outcome.

    The SINR screening fields are None when no targets were supplied.
    """
    rates_bps: np.ndarray
    slack_bps: np.ndarray
    passed: np.ndarray
    private_sinr_ok: Optional[np.ndarray] = None
    common_sinr_ok: Optional[np.ndarray] = None

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))

    @property
    def screening_passed(self) -> bool:
        if self.private_sinr_ok is None:
            return True
        return bool(np.all(self.private_sinr_ok) and np.all(self.common_sinr_ok))


def rate_tolerance(qos_bps: np.ndarray, config: SystemConfig) -> np.ndarray:
    """Allowed rate shortfall per user."""
    return config.qos_rate_tol_rel * np.asarray(qos_bps) + config.qos_rate_tol_abs_bps


def check_qos(beamformers: BeamformerSet, v, channels: ChannelSet, structure: DecodingStructure,
              config: SystemConfig, targets: Optional[RateAllocation] = None,
              screen_tol: Optional[float] = None) -> QosReport:
    """Check rate floors and, optionally, the SINR-vs-target conditions.

    Args:
        beamformers: Beamformers to evaluate
        v: Phase shift
        channels: Channel realization
        structure: Decoding structure
        config: System parameters (rate floors, bandwidth, tolerances)
        targets: SINR targets to screen against; skipped when None
        screen_tol: Relative SINR tolerance; defaults to config.sinr_screen_tol

    Returns:
        QosReport
    """
    table = sinr_table(beamformers, v, channels, structure)
    rates = rates_from_sinrs(table, config.bandwidth_hz)
    qos = config.qos_vector()
    slack = rates - qos
    passed = slack >= -rate_tolerance(qos, config)
    if targets is None:
        return QosReport(rates, slack, passed)

    tol = config.sinr_screen_tol if screen_tol is None else screen_tol
    private_ok = table.private >= targets.t_private * (1.0 - tol)
    common_ok = np.ones(structure.n_users, dtype=bool)
    for k in range(structure.n_users):
        if targets.t_common[k] > 0:
            worst = np.min([table.common[i, k] for i in structure.decoders[k]])
            common_ok[k] = worst >= targets.t_common[k] * (1.0 - tol)
    return QosReport(rates, slack, passed, private_ok, common_ok)
