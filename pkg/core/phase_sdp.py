"""
Phase-shift design by semidefinite lifting.

With beamformers and SINR targets fixed, every received power is an affine
function of the lifted matrix V = [v; 1][v; 1]^H. The phase subproblem
maximizes weighted SINR residuals over V with unit diagonal and V PSD,
penalizing rank through trace(V) minus a linearized spectral norm. Phase
vectors are then recovered by Gaussian randomization and screened
against the SINR targets.
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


import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from core.beamform_sca import MODE_RS, MODE_TIN
from core.config import SystemConfig
from core.conic import ConeKind, ConicProgram, HermitianEmbedding, ProgramBuilder, solve
from core.rs_core import BeamformerSet, DecodingStructure, RateAllocation, check_qos, sum_rate
from core.scenario import ChannelSet, PhaseShift, complex_gaussian
from utils.error_handling import ValidationError


logger = logging.getLogger(__name__)

EIGEN_CUTOFF = 1e-10


@dataclass(frozen=True, eq=False)
class LiftingData:
    """Lifted received-power coefficients.

    For stream o in {"p", "c"}: b[o][k, i] = h_k^H w_i^o,
    a[o][k, i] = H_k^H w_i^o and M[o][k, i] = [[a a^H, a b*], [b a^H, 0]],
    so that |(h_k + H_k v)^H w_i^o|^2 = |b|^2 + [v; 1]^H M [v; 1].
    """
    b: dict
    a: dict
    M: dict

    @property
    def n_users(self) -> int:
        return self.b['p'].shape[0]

    @property
    def order(self) -> int:
        return self.M['p'].shape[-1]

    def received_power(self, o: str, k: int, i: int, v) -> float:
        """|(h_k + H_k v)^H w_i^o|^2 through the lifted form."""
        vec = v.extended() if isinstance(v, PhaseShift) else np.append(v, 1.0)
        quad = np.vdot(vec, self.M[o][k, i] @ vec).real
        return float(abs(self.b[o][k, i]) ** 2 + quad)


@dataclass(frozen=True, eq=False)
class LiftedSolution:
    V: Optional[np.ndarray]
    zeta_private: Optional[np.ndarray]
    zeta_common: Optional[np.ndarray]
    objective: float
    status: str


def build_lifting(channels: ChannelSet, beamformers: BeamformerSet) -> LiftingData:
    """Lifting data of all (receiver, stream) pairs."""
    if beamformers.n_tx != channels.n_tx or beamformers.n_users != channels.n_users:
        raise ValidationError("Beamformer and channel dimensions differ")
    b, a, M = {}, {}, {}
    for o, W in (('p', beamformers.private), ('c', beamformers.common)):
        b[o] = channels.direct.conj() @ W.T                              # (K, K)
        a[o] = np.einsum('knr,in->kir', channels.cascade.conj(), W)      # (K, K, R)
        K, _, R = a[o].shape
        lifted = np.zeros((K, K, R + 1, R + 1), dtype=complex)
        lifted[:, :, :R, :R] = a[o][..., :, None] * a[o][..., None, :].conj()
        lifted[:, :, :R, R] = a[o] * b[o][..., None].conj()
        lifted[:, :, R, :R] = b[o][..., None] * a[o].conj()
        M[o] = lifted
    return LiftingData(b, a, M)


def eta_weights(beamformers: BeamformerSet) -> Tuple[np.ndarray, np.ndarray]:
    """Per-stream priorities: stream power over the largest stream power.

    Raises:
        ValidationError: If every beamformer is zero
    """
    powers = beamformers.user_powers()
    peak = powers.max()
    if not peak > 0:
        raise ValidationError("Priority weights are undefined for all-zero beamformers")
    return powers[:, 0] / peak, powers[:, 1] / peak


def _leading_vector(matrix: np.ndarray) -> Tuple[float, np.ndarray]:
    """Unit leading eigenvector with a deterministic tie-break."""
    matrix = 0.5 * (matrix + matrix.conj().T)
    eigenvalues, vectors = np.linalg.eigh(matrix)
    top = eigenvalues[-1]
    tol = 1e-12 * max(1.0, abs(top))
    candidates = []
    for idx in np.flatnonzero(eigenvalues >= top - tol):
        vec = vectors[:, idx]
        lead = np.flatnonzero(np.abs(vec) > 1e-12)[0]
        vec = vec * np.exp(-1j * np.angle(vec[lead]))
        candidates.append(vec)
    chosen = min(candidates, key=lambda vec: tuple(np.column_stack([vec.real, vec.imag]).ravel()))
    return float(top), chosen / np.linalg.norm(chosen)


def spectral_subgradient(V0: np.ndarray) -> np.ndarray:
    """Subgradient e1 e1^H of the spectral norm at a PSD matrix."""
    _, e1 = _leading_vector(np.asarray(V0, dtype=complex))
    return np.outer(e1, e1.conj())


def _stream_row(lifting: LiftingData, signal: Tuple[str, int, int],
                interferers: Sequence[Tuple[str, int, int]], target: float,
                noise: float) -> Tuple[float, np.ndarray]:
    """Constant and Hermitian coefficient of signal - target * (interference + noise), over noise."""
    o, k, i = signal
    constant = abs(lifting.b[o][k, i]) ** 2
    matrix = lifting.M[o][k, i].copy()
    for o2, k2, i2 in interferers:
        constant -= target * abs(lifting.b[o2][k2, i2]) ** 2
        matrix -= target * lifting.M[o2][k2, i2]
    constant -= target * noise
    return constant / noise, matrix / noise


def build_sdp(lifting: LiftingData, targets: RateAllocation, structure: DecodingStructure,
              eta: Tuple[np.ndarray, np.ndarray], V0: np.ndarray, rho: float,
              noise_power_w: float, mode: str = MODE_RS) -> ConicProgram:
    """Penalized lifted phase-shift program.

    Maximizes rho * sum(eta * zeta) - (1 - rho) * (trace(V) - <E, V>) plus
    the matching constant, where E is the spectral subgradient at V0.
    Residuals zeta are measured in units of the noise power.

    Args:
        lifting: Lifting data of the current beamformers
        targets: SINR targets to keep
        structure: Decoding structure
        eta: Private and common priorities
        V0: Linearization point (PSD, unit diagonal)
        rho: Trade-off between residuals and rank penalty, in (0, 1]
        noise_power_w: Noise power
        mode: MODE_TIN drops the common rows and pins their residuals to zero

    Returns:
        ConicProgram with blocks theta, zeta_p, zeta_c
    """
    if not 0 < rho <= 1:
        raise ValidationError(f"Trade-off factor must be in (0, 1], got {rho}")
    K = lifting.n_users
    n = lifting.order
    embedding = HermitianEmbedding(n)

    builder = ProgramBuilder()
    theta = builder.add_block('theta', embedding.n_params)
    zeta_p = builder.add_block('zeta_p', K)
    zeta_c = builder.add_block('zeta_c', K)

    E = spectral_subgradient(V0)
    c = builder.objective_vector()
    c[zeta_p] = rho * eta[0]
    c[zeta_c] = rho * eta[1]
    c[theta] = -(1.0 - rho) * embedding.trace_product_coeffs(np.eye(n) - E)
    top, _ = _leading_vector(np.asarray(V0, dtype=complex))
    constant = (1.0 - rho) * (top - float(np.real(np.trace(E @ V0))))
    builder.set_objective(c, constant)

    rows = []
    for k in range(K):
        interferers = [('p', k, m) for m in range(K) if m != k]
        interferers += [('c', k, l) for l in sorted(structure.not_decoded_by_me[k])]
        rows.append((_stream_row(lifting, ('p', k, k), interferers, targets.t_private[k], noise_power_w),
                     zeta_p[k]))
    if mode == MODE_RS:
        for k in range(K):
            for i in sorted(structure.decoders[k]):
                interferers = [('p', i, j) for j in range(K)]
                interferers += [('c', i, l) for l in sorted(structure.not_decoded_by_me[i])]
                interferers += [('c', i, m) for m in sorted(structure.after(i, k))]
                rows.append((_stream_row(lifting, ('c', i, k), interferers, targets.t_common[k],
                                         noise_power_w), zeta_c[k]))

    A = builder.rows(len(rows))
    b = np.zeros(len(rows))
    for r, ((constant_r, matrix_r), zeta_idx) in enumerate(rows):
        A[r, theta] = embedding.trace_product_coeffs(matrix_r)
        A[r, zeta_idx] = -1.0
        b[r] = constant_r
    builder.add(ConeKind.NONNEG, A, b, label="sinr_residual")
    builder.nonneg(np.concatenate([zeta_p, zeta_c]), label="zeta_nonneg")
    if mode == MODE_TIN:
        builder.fix(zeta_c, label="no_common")

    builder.fix(theta[:n], np.ones(n), label="unit_diagonal")
    P = embedding.param_matrix()
    A = _place_columns(P, theta, builder.n_vars)
    builder.add(ConeKind.PSD, A, np.zeros(P.shape[0]), order=embedding.embedded_order, label="psd")

    return builder.build("maximize", {'order': n, 'n_users': K})


def _place_columns(P, columns: np.ndarray, n_vars: int):
    """Widen P so its columns land at the given variable indices."""
    coo = P.tocoo()
    return sp.csr_matrix((coo.data, (coo.row, columns[coo.col])), shape=(P.shape[0], n_vars))


def decode_sdp(program: ConicProgram, x: Optional[np.ndarray], status: str,
               objective: float) -> LiftedSolution:
    if x is None:
        return LiftedSolution(None, None, None, objective, status)
    embedding = HermitianEmbedding(program.meta['order'])
    V = embedding.from_params(x[program.block('theta')])
    return LiftedSolution(V, np.clip(x[program.block('zeta_p')], 0, None),
                          np.clip(x[program.block('zeta_c')], 0, None), objective, status)


def solve_sdp(program: ConicProgram, tol: float = 1e-8) -> LiftedSolution:
    solution = solve(program, tol)
    return decode_sdp(program, solution.x, solution.status, solution.objective)


def gaussian_randomize(V: np.ndarray, G: int, rng: np.random.Generator) -> List[PhaseShift]:
    """Draw G unit-modulus candidates from a lifted solution.

    Each candidate is the phase of the first R entries of U S^1/2 z,
    normalized by its last entry, with z a standard complex Gaussian.
    """
    V = np.asarray(V, dtype=complex)
    eigenvalues, U = np.linalg.eigh(0.5 * (V + V.conj().T))
    cutoff = EIGEN_CUTOFF * max(eigenvalues[-1], 0.0)
    root = np.sqrt(np.where(eigenvalues > cutoff, eigenvalues, 0.0))
    factor = U * root[None, :]
    candidates = []
    for _ in range(G):
        z = complex_gaussian(rng, (V.shape[0],))
        sample = factor @ z
        if abs(sample[-1]) > 0:
            sample = sample / sample[-1]
        candidates.append(PhaseShift.project(sample[:-1]))
    return candidates


def principal_candidate(V: np.ndarray) -> PhaseShift:
    """Phase projection of the leading eigenvector of V."""
    _, e1 = _leading_vector(np.asarray(V, dtype=complex))
    if abs(e1[-1]) > 0:
        e1 = e1 / e1[-1]
    return PhaseShift.project(e1[:-1])


def select_phase_shift(candidates: Sequence[PhaseShift], beamformers: BeamformerSet,
                       targets: RateAllocation, channels: ChannelSet, structure: DecodingStructure,
                       config: SystemConfig) -> Optional[PhaseShift]:
    """Highest sum-rate candidate among those meeting every SINR target.

    Returns:
        Selected phase shift, or None if no candidate is feasible
    """
    best, best_rate = None, -np.inf
    for candidate in candidates:
        report = check_qos(beamformers, candidate, channels, structure, config, targets)
        if not report.screening_passed:
            continue
        rate = sum_rate(beamformers, candidate, channels, structure, config.bandwidth_hz)
        if rate > best_rate:
            best, best_rate = candidate, rate
    return best


def optimize_phase(channels: ChannelSet, v: PhaseShift, beamformers: BeamformerSet,
                   targets: RateAllocation, structure: DecodingStructure, config: SystemConfig,
                   rng: np.random.Generator, mode: str = MODE_RS) -> Optional[PhaseShift]:
    """One phase-shift step: lift, solve, randomize and select.

    Returns:
        New phase shift, or None when the program is infeasible or no candidate passes
    """
    lifting = build_lifting(channels, beamformers)
    eta = eta_weights(beamformers)
    lifted = v.extended()
    V0 = np.outer(lifted, lifted.conj())
    solution = None
    for _ in range(config.sdp_inner_repeats):
        program = build_sdp(lifting, targets, structure, eta, V0, config.penalty_tradeoff,
                            channels.noise_power_w, mode)
        attempt = solve_sdp(program, config.solver_tol)
        if attempt.V is None:
            logger.info("Phase-shift program %s", attempt.status)
            break
        solution = attempt
        V0 = attempt.V
    if solution is None:
        return None

    candidates = gaussian_randomize(solution.V, config.n_randomizations, rng)
    if config.include_principal_candidate:
        candidates.append(principal_candidate(solution.V))
    selected = select_phase_shift(candidates, beamformers, targets, channels, structure, config)
    if selected is None:
        logger.info("No randomized phase candidate met the SINR targets")
    return selected
