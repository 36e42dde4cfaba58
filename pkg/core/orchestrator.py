"""
Alternating optimization of beamformers and IRS phase shifts.

Beamformers are refined by SCA with the phase shift fixed, then the phase
shift is refined by the lifted program with beamformers and SINR targets
fixed, until the weighted power stops decreasing. Baseline schemes reuse
the same loop with common streams removed or the IRS switched off.
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
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from core.beamform_sca import MODE_RS, MODE_TIN, ScaTrace, init_mrc, repair_point, sca_iterate
from core.config import SystemConfig
from core.phase_sdp import optimize_phase
from core.rs_core import (BeamformerSet, DecodingStructure, RateAllocation, achieved_rates,
                          build_decoding_structure, check_qos, total_power)
from core.scenario import ChannelSet, PhaseShift
from utils.error_handling import ValidationError


logger = logging.getLogger(__name__)

SCHEME_RS_IRS = "rs_irs"
SCHEME_RS_NOIRS = "rs_noirs"
SCHEME_TIN_IRS = "tin_irs"
SCHEME_TIN_NOIRS = "tin_noirs"


@dataclass(eq=False)
class OptResult:
    """Outcome of one optimization run.

    phase is None when the phase-shift stage was not run.
    """
    scheme: str
    beamformers: BeamformerSet
    phase: Optional[PhaseShift]
    structure: DecodingStructure
    power_trajectory: List[float] = field(default_factory=list)
    outer_iterations: int = 0
    rates_bps: Optional[np.ndarray] = None
    feasible: bool = False
    degraded: bool = False
    qos_scaled: bool = False
    allocation: Optional[RateAllocation] = None
    sca_traces: List[ScaTrace] = field(default_factory=list)
    weighted_power_w: float = float('nan')
    unweighted_power_w: float = float('nan')

    @property
    def common_power_w(self) -> float:
        return float(self.beamformers.user_powers()[:, 1].sum())


def _has_cascade(channels: ChannelSet) -> bool:
    return channels.n_reflect > 0 and bool(np.any(channels.cascade != 0))


def alternating_optimize(channels: ChannelSet, config: SystemConfig, rng: np.random.Generator,
                         phase_enabled: bool = True, mode: str = MODE_RS,
                         scheme: str = SCHEME_RS_IRS) -> OptResult:
    """Minimize weighted transmit power under per-user rate floors.

    The phase shift starts at all ones and the decoding structure is fixed
    from it for the whole run. An outer iteration is one SCA pass followed
    by one phase-shift step; a phase step that finds no feasible candidate
    keeps the previous phase shift and the loop carries on with beamforming
    only. The loop stops when the power decrease over an outer iteration is
    below stop_epsilon times the current power, or after max_outer_iters.

    Args:
        channels: Channel realization
        config: System parameters
        rng: Random source for Gaussian randomization
        phase_enabled: Run the phase-shift stage
        mode: MODE_RS or MODE_TIN
        scheme: Label stored on the result

    Returns:
        OptResult; feasible is False with an empty trajectory if no
        starting point exists
    """
    K = channels.n_users
    weights = config.weights_vector()
    v = PhaseShift.ones(channels.n_reflect)
    if mode == MODE_RS:
        structure = build_decoding_structure(channels, v, config.decode_group_max)
    else:
        structure = DecodingStructure.private_only(K)
    phase_active = phase_enabled and _has_cascade(channels)

    start = init_mrc(channels, v, structure, config, mode)
    result = OptResult(scheme, start.beamformers, v if phase_enabled else None, structure,
                       qos_scaled=start.qos_scaled, allocation=start.allocation)
    if not start.feasible:
        logger.warning("%s: no feasible starting point", scheme)
        return _finish(result, channels, v, config, weights)

    point = start
    for outer in range(1, config.max_outer_iters + 1):
        bf, alloc, trace = sca_iterate(channels, v, structure, config, point, mode)
        result.sca_traces.append(trace)
        result.degraded |= trace.degraded
        if trace.infeasible:
            logger.warning("%s: beamforming subproblem infeasible from the initial point", scheme)
            result.power_trajectory.clear()
            return _finish(result, channels, v, config, weights)

        result.beamformers, result.allocation = bf, alloc
        result.outer_iterations = outer
        power = total_power(bf, weights)
        previous = result.power_trajectory[-1] if result.power_trajectory else None
        result.power_trajectory.append(power)
        logger.debug("%s outer iteration %d: power %.6e W", scheme, outer, power)

        if power == 0.0 or not phase_active:
            break
        if previous is not None and previous - power < config.stop_epsilon * power:
            break

        targets = repair_point(bf, alloc, channels, v, structure, config, mode).allocation
        new_v = optimize_phase(channels, v, bf, targets, structure, config, rng, mode)
        if new_v is not None:
            v = new_v
        point = repair_point(bf, alloc, channels, v, structure, config, mode)

    if phase_enabled:
        result.phase = v
    return _finish(result, channels, v, config, weights)


def _finish(result: OptResult, channels: ChannelSet, v: PhaseShift, config: SystemConfig,
            weights: np.ndarray) -> OptResult:
    bf = result.beamformers
    result.rates_bps = achieved_rates(bf, v, channels, result.structure, config.bandwidth_hz)
    result.weighted_power_w = total_power(bf, weights)
    result.unweighted_power_w = total_power(bf)
    started = bool(result.power_trajectory)
    result.feasible = started and check_qos(bf, v, channels, result.structure, config).all_passed
    return result


def run_tin(channels: ChannelSet, config: SystemConfig, with_irs: bool,
            rng: np.random.Generator) -> OptResult:
    """Treat-interference-as-noise baseline: private streams only."""
    if with_irs:
        return alternating_optimize(channels, config, rng, True, MODE_TIN, SCHEME_TIN_IRS)
    return alternating_optimize(channels.without_irs(), config, rng, False, MODE_TIN, SCHEME_TIN_NOIRS)


def run_no_irs_rs(channels: ChannelSet, config: SystemConfig, rng: np.random.Generator) -> OptResult:
    """Rate-splitting baseline with the cascade channels removed."""
    return alternating_optimize(channels.without_irs(), config, rng, False, MODE_RS, SCHEME_RS_NOIRS)


def run_scheme(scheme: str, channels: ChannelSet, config: SystemConfig,
               rng: np.random.Generator) -> OptResult:
    """Dispatch a scheme label to its runner."""
    if scheme == SCHEME_RS_IRS:
        return alternating_optimize(channels, config, rng)
    if scheme == SCHEME_RS_NOIRS:
        return run_no_irs_rs(channels, config, rng)
    if scheme == SCHEME_TIN_IRS:
        return run_tin(channels, config, True, rng)
    if scheme == SCHEME_TIN_NOIRS:
        return run_tin(channels, config, False, rng)
    raise ValidationError(f"Unknown scheme: {scheme}")
