"""
Beamforming design by successive convex approximation.

For fixed phase shifts, the SINR constraints of the power minimization
problem are rewritten as |h^H w|^2 / t >= interference + noise, and the
convex quadratic-over-linear left side is replaced by its first-order
Taylor expansion around the current point. Each subproblem is a conic
program (second-order and exponential cones) whose solution is again
feasible for the original constraints, so the power never increases.
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
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from core.config import SystemConfig
from core.conic import ConeKind, ConicProgram, ProgramBuilder, rate_log_constraint, solve
from core.rs_core import (
    BeamformerSet, DecodingStructure, RateAllocation, gain_matrices,
    sinr_table, total_power,
)
from core.scenario import ChannelSet, effective_channels
from utils.error_handling import ValidationError


logger = logging.getLogger(__name__)

MODE_RS = "rs"
MODE_TIN = "tin"

INIT_SINR_MARGIN = 1e-6
INIT_BISECTION_STEPS = 40
YATES_MAX_ITERS = 5000
STATIONARY_STEP = 1e-6
DESCENT_SLACK = 1e-7


@dataclass(frozen=True, eq=False)
class ExpansionPoint:
    """Beamformers and SINR targets around which the constraints are linearized.

    Streams whose target is at or below the configured floor carry no
    data and are held at zero rate.
    """
    beamformers: BeamformerSet
    allocation: RateAllocation
    qos_scaled: bool = False
    qos_scale: float = 1.0
    feasible: bool = True


@dataclass
class ScaTrace:
    """Bookkeeping of one SCA run."""
    objectives: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    degraded: bool = False
    infeasible: bool = False
    stop_reason: str = ""


def taylor_bound_private(h_eff: np.ndarray, w_private: np.ndarray, t_private: float,
                         point: ExpansionPoint, k: int) -> float:
    """First-order lower bound of |h^H w_k^p|^2 / t_k^p around the expansion point.

    Raises:
        ValidationError: If the expansion target is not positive
    """
    return _taylor_bound(h_eff, w_private, t_private,
                         point.beamformers.private[k], point.allocation.t_private[k])


def taylor_bound_common(h_i_eff: np.ndarray, w_common: np.ndarray, t_common: float,
                        point: ExpansionPoint, i: int, k: int) -> float:
    """First-order lower bound of |h_i^H w_k^c|^2 / t_k^c around the expansion point.

    Raises:
        ValidationError: If the expansion target is not positive
    """
    return _taylor_bound(h_i_eff, w_common, t_common,
                         point.beamformers.common[k], point.allocation.t_common[k])


def _taylor_bound(h, w, t, w_tilde, t_tilde) -> float:
    if not t_tilde > 0:
        raise ValidationError(f"Expansion target must be positive, got {t_tilde}")
    z_tilde = np.vdot(h, w_tilde)
    z = np.vdot(h, w)
    return float(2.0 * np.real(np.conj(z_tilde) * z) / t_tilde
                 - abs(z_tilde) ** 2 * t / t_tilde ** 2)


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return np.divide(rows, norms, out=np.zeros_like(rows), where=norms > 0)


def _targets(qos_bps: np.ndarray, bandwidth_hz: float, beta: float, mode: str) -> np.ndarray:
    """Per-stream SINR targets for a fraction beta of the rate floors."""
    share = 1.0 if mode == MODE_TIN else 0.5
    return (np.exp2(beta * share * qos_bps / bandwidth_hz) - 1.0) * (1.0 + INIT_SINR_MARGIN)


def _yates_powers(Gp: np.ndarray, Gc: np.ndarray, xp: np.ndarray, xc: np.ndarray,
                  structure: DecodingStructure, noise: float,
                  cap: float) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Smallest stream powers meeting the SINR targets, or None above the cap."""
    K = xp.size
    pp, pc = np.zeros(K), np.zeros(K)
    if (np.any((xp > 0) & (np.diag(Gp) <= 0))
            or any(xc[k] > 0 and Gc[i, k] <= 0 for k in range(K) for i in structure.decoders[k])):
        return None
    psi = [list(structure.not_decoded_by_me[k]) for k in range(K)]

    for _ in range(YATES_MAX_ITERS):
        received = Gp @ pp + noise
        new_pp = np.zeros(K)
        new_pc = np.zeros(K)
        for k in range(K):
            if xp[k] > 0:
                interference = received[k] - Gp[k, k] * pp[k] + Gc[k, psi[k]] @ pc[psi[k]]
                new_pp[k] = xp[k] * interference / Gp[k, k]
            if xc[k] > 0:
                needs = []
                for i in structure.decoders[k]:
                    omega = list(structure.after(i, k))
                    interference = received[i] + Gc[i, psi[i]] @ pc[psi[i]] + Gc[i, omega] @ pc[omega]
                    needs.append(xc[k] * interference / Gc[i, k])
                new_pc[k] = max(needs)
        if new_pp.sum() + new_pc.sum() > cap:
            return None
        change = max(np.max(np.abs(new_pp - pp)), np.max(np.abs(new_pc - pc)))
        pp, pc = new_pp, new_pc
        if change <= 1e-13 * max(pp.max(initial=0.0), pc.max(initial=0.0), 1e-300):
            return pp, pc
    return None


def init_mrc(channels: ChannelSet, v, structure: DecodingStructure, config: SystemConfig,
             mode: str = MODE_RS, template: Optional[BeamformerSet] = None) -> ExpansionPoint:
    """Feasible starting point from matched-filter directions.

    Private beamformers follow each user's own effective channel and common
    beamformers follow the weakest decoder in M_k. Powers meeting the equal
    rate split are found by fixed-point iteration; if they exceed the power
    cap, the rate floors are scaled down by bisection and the point is
    flagged.

    Args:
        channels: Channel realization
        v: Phase shift
        structure: Decoding structure
        config: System parameters
        mode: MODE_RS or MODE_TIN (private streams only)
        template: Beamformer set supplying the cluster masks

    Returns:
        ExpansionPoint; feasible is False if no positive rate can be supported
    """
    h = effective_channels(channels, v)
    K, NL = h.shape
    if template is None:
        template = BeamformerSet.zeros(K, NL // config.antennas_per_bs, config.antennas_per_bs)
    qos = config.qos_vector()
    B = config.bandwidth_hz
    noise = channels.noise_power_w
    use_common = mode == MODE_RS

    dir_p = _unit_rows(np.where(template.mask_private(), h, 0))
    norms = np.linalg.norm(h, axis=1)
    weakest = [min(structure.decoders[k], key=lambda i: (norms[i], i)) for k in range(K)]
    dir_c = _unit_rows(np.where(template.mask_common(), h[weakest], 0))
    Gp, Gc = gain_matrices(h, template.replace(private=dir_p, common=dir_c))

    def powers(beta):
        xp = _targets(qos, B, beta, mode)
        xc = _targets(qos, B, beta, mode) if use_common else np.zeros(K)
        return _yates_powers(Gp, Gc, xp, xc, structure, noise, config.init_power_cap_w)

    beta, result = 1.0, powers(1.0)
    if result is None:
        lo, hi, best = 0.0, 1.0, None
        for _ in range(INIT_BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            trial = powers(mid)
            if trial is None:
                hi = mid
            else:
                lo, best = mid, trial
        beta, result = lo, best
        if result is None:
            logger.warning("No positive rate is reachable within the power cap")
            empty = template.replace(private=np.zeros_like(h), common=np.zeros_like(h))
            return ExpansionPoint(empty, RateAllocation.zeros(K), True, 0.0, False)
        logger.warning("Initialization scaled rate floors by %.4f", beta)

    pp, pc = result
    bf = template.replace(private=np.sqrt(pp)[:, None] * dir_p,
                          common=np.sqrt(pc)[:, None] * dir_c)
    table = sinr_table(bf, v, channels, structure)
    floor = config.t_floor
    t_p = np.maximum(table.private, floor)
    t_c = np.maximum(table.common_worst(), floor) if use_common else np.zeros(K)
    r_p = np.where(t_p > floor, B * np.log2(1.0 + t_p), 0.0)
    r_c = np.where(t_c > floor, B * np.log2(1.0 + t_c), 0.0)
    allocation = RateAllocation(r_p, r_c, t_p, t_c)
    return ExpansionPoint(bf, allocation, beta < 1.0, beta, True)


def _dead_streams(point: ExpansionPoint, config: SystemConfig, mode: str) -> Tuple[np.ndarray, np.ndarray]:
    dead_p = point.allocation.t_private <= config.t_floor
    dead_c = point.allocation.t_common <= config.t_floor
    if mode == MODE_TIN:
        dead_c = np.ones_like(dead_c)
    return dead_p, dead_c


def _power_scale(beamformers: BeamformerSet) -> float:
    power = total_power(beamformers)
    return math.sqrt(power) if power > 0 else 1.0


def _put_inner(A: sp.lil_matrix, row: int, re_cols: np.ndarray, im_cols: np.ndarray,
               h: np.ndarray, factor: float = 1.0):
    """Rows (row, row+1) = factor * (Re, Im) of h^H u for u = x + j y."""
    c, d = h.real, h.imag
    A[row, re_cols] = factor * c
    A[row, im_cols] = factor * d
    A[row + 1, re_cols] = -factor * d
    A[row + 1, im_cols] = factor * c


def _put_taylor(A: sp.lil_matrix, b: np.ndarray, rows: Sequence[int], re_cols, im_cols,
                t_col: int, h: np.ndarray, u_tilde: np.ndarray, t_tilde: float, offset: float):
    """Write L + offset into each listed row, L the Taylor bound in (u, t)."""
    z_tilde = np.vdot(h, u_tilde)
    q = z_tilde * h
    for row in rows:
        A[row, re_cols] = (2.0 / t_tilde) * q.real
        A[row, im_cols] = (2.0 / t_tilde) * q.imag
        A[row, t_col] = -abs(z_tilde) ** 2 / t_tilde ** 2
        b[row] = offset


def build_subproblem(channels: ChannelSet, v, structure: DecodingStructure, point: ExpansionPoint,
                     config: SystemConfig, mode: str = MODE_RS) -> ConicProgram:
    """Convex inner approximation of the beamforming problem at a point.

    Variables are the real and imaginary parts of the beamformers (scaled
    by the power of the point and by the noise level), the SINR targets,
    the spectral efficiencies of both streams and a power epigraph. The
    objective value is the weighted transmit power in watts.

    Returns:
        ConicProgram with blocks up_re, up_im, uc_re, uc_im, tp, tc, rp, rc, tau
    """
    h = effective_channels(channels, v)
    K, NL = h.shape
    bf = point.beamformers
    scale = _power_scale(bf)
    h_hat = h * (scale / math.sqrt(channels.noise_power_w))
    u_p = bf.private / scale
    u_c = bf.common / scale
    t_p, t_c = point.allocation.t_private, point.allocation.t_common
    dead_p, dead_c = _dead_streams(point, config, mode)
    weights = config.weights_vector()
    qos_se = config.qos_vector() / config.bandwidth_hz

    builder = ProgramBuilder()
    up_re = builder.add_block('up_re', K * NL).reshape(K, NL)
    up_im = builder.add_block('up_im', K * NL).reshape(K, NL)
    uc_re = builder.add_block('uc_re', K * NL).reshape(K, NL)
    uc_im = builder.add_block('uc_im', K * NL).reshape(K, NL)
    tp = builder.add_block('tp', K)
    tc = builder.add_block('tc', K)
    rp = builder.add_block('rp', K)
    rc = builder.add_block('rc', K)
    tau = builder.add_block('tau', 1)[0]

    c = builder.objective_vector()
    c[tau] = scale ** 2
    builder.set_objective(c)

    # sum_k alpha_k |u_k|^2 <= tau as |(2 sqrt(alpha) u, tau - 1)| <= tau + 1
    A = builder.rows(2 + 4 * K * NL)
    b = np.zeros(A.shape[0])
    A[0, tau], b[0] = 1.0, 1.0
    A[1, tau], b[1] = 1.0, -1.0
    row = 2
    for k in range(K):
        for cols in (up_re[k], up_im[k], uc_re[k], uc_im[k]):
            A[np.arange(row, row + NL), cols] = 2.0 * math.sqrt(weights[k])
            row += NL
    builder.add(ConeKind.SOC, A, b, label="power_epigraph")

    A = builder.rows(K)
    for k in range(K):
        A[k, rp[k]] = 1.0
        A[k, rc[k]] = 1.0
    builder.add(ConeKind.NONNEG, A, -qos_se, label="rate_floor")

    for k in range(K):
        for con in rate_log_constraint(builder.n_vars, rp[k], tp[k], 1.0):
            builder.add(con.kind, con.A, con.b, label=f"private_log_{k}")
        if not dead_c[k]:
            for con in rate_log_constraint(builder.n_vars, rc[k], tc[k], 1.0):
                builder.add(con.kind, con.A, con.b, label=f"common_log_{k}")
    builder.nonneg(np.concatenate([tp, tc, rp, rc]), label="t_r_nonneg")

    builder.fix(np.concatenate([tp[dead_p], rp[dead_p], tc[dead_c], rc[dead_c]]), label="dead_streams")
    off_p = ~bf.mask_private()
    off_c = ~bf.mask_common()
    if mode == MODE_TIN:
        off_c = np.ones_like(off_c)
    builder.fix(np.concatenate([up_re[off_p], up_im[off_p], uc_re[off_c], uc_im[off_c]]),
                label="cluster_mask")

    for k in range(K):
        if dead_p[k]:
            continue
        terms = [(h_hat[k], up_re[m], up_im[m]) for m in range(K) if m != k]
        if mode == MODE_RS:
            terms += [(h_hat[k], uc_re[l], uc_im[l]) for l in sorted(structure.not_decoded_by_me[k])]
        _add_dc_row(builder, terms, h_hat[k], up_re[k], up_im[k], tp[k], u_p[k], t_p[k],
                    f"private_dc_{k}")

    if mode == MODE_RS:
        for k in range(K):
            if dead_c[k]:
                continue
            for i in sorted(structure.decoders[k]):
                terms = [(h_hat[i], up_re[j], up_im[j]) for j in range(K)]
                terms += [(h_hat[i], uc_re[l], uc_im[l]) for l in sorted(structure.not_decoded_by_me[i])]
                terms += [(h_hat[i], uc_re[m], uc_im[m]) for m in sorted(structure.after(i, k))]
                _add_dc_row(builder, terms, h_hat[i], uc_re[k], uc_im[k], tc[k], u_c[k], t_c[k],
                            f"common_dc_{i}_{k}")

    meta = {'scale': scale, 'mode': mode, 'bandwidth_hz': config.bandwidth_hz,
            'dead_private': dead_p, 'dead_common': dead_c, 'shape': (K, NL)}
    return builder.build("minimize", meta)


def _add_dc_row(builder: ProgramBuilder, terms, h_sig, sig_re, sig_im, t_col,
                u_tilde, t_tilde, label: str):
    """sum |interference|^2 + 1 <= L as the cone |(2 a, L - 2)| <= L."""
    A = builder.rows(2 + 2 * len(terms))
    b = np.zeros(A.shape[0])
    _put_taylor(A, b, (0,), sig_re, sig_im, t_col, h_sig, u_tilde, t_tilde, 0.0)
    _put_taylor(A, b, (1,), sig_re, sig_im, t_col, h_sig, u_tilde, t_tilde, -2.0)
    for n, (h, re_cols, im_cols) in enumerate(terms):
        _put_inner(A, 2 + 2 * n, re_cols, im_cols, h, 2.0)
    builder.add(ConeKind.SOC, A, b, label=label)


def extract_solution(program: ConicProgram, x: np.ndarray,
                     template: BeamformerSet) -> Tuple[BeamformerSet, RateAllocation]:
    """Beamformers (W^1/2) and allocation (bps) from a subproblem solution."""
    K, NL = program.meta['shape']
    scale = program.meta['scale']
    B = program.meta['bandwidth_hz']

    def vec(name):
        return x[program.block(name)]

    private = (vec('up_re') + 1j * vec('up_im')).reshape(K, NL) * scale
    common = (vec('uc_re') + 1j * vec('uc_im')).reshape(K, NL) * scale
    if program.meta['mode'] == MODE_TIN:
        common = np.zeros_like(common)
    bf = template.replace(private=private, common=common)
    allocation = RateAllocation(B * np.clip(vec('rp'), 0, None), B * np.clip(vec('rc'), 0, None),
                                np.clip(vec('tp'), 0, None), np.clip(vec('tc'), 0, None))
    return bf, allocation


def encode_point(program: ConicProgram, point: ExpansionPoint, weights) -> np.ndarray:
    """Variable vector of a subproblem corresponding to an expansion point."""
    scale = program.meta['scale']
    B = program.meta['bandwidth_hz']
    dead_p, dead_c = program.meta['dead_private'], program.meta['dead_common']
    bf, alloc = point.beamformers, point.allocation
    x = np.zeros(program.n_vars)
    u_p, u_c = bf.private / scale, bf.common / scale
    x[program.block('up_re')] = u_p.real.ravel()
    x[program.block('up_im')] = u_p.imag.ravel()
    x[program.block('uc_re')] = u_c.real.ravel()
    x[program.block('uc_im')] = u_c.imag.ravel()
    x[program.block('tp')] = np.where(dead_p, 0.0, alloc.t_private)
    x[program.block('tc')] = np.where(dead_c, 0.0, alloc.t_common)
    x[program.block('rp')] = np.where(dead_p, 0.0, alloc.rate_private / B)
    x[program.block('rc')] = np.where(dead_c, 0.0, alloc.rate_common / B)
    per_user = np.sum(np.abs(u_p) ** 2, axis=1) + np.sum(np.abs(u_c) ** 2, axis=1)
    x[program.block('tau')] = float(np.dot(weights, per_user))
    return x


def repair_point(beamformers: BeamformerSet, allocation: RateAllocation, channels: ChannelSet, v,
                 structure: DecodingStructure, config: SystemConfig,
                 mode: str = MODE_RS) -> ExpansionPoint:
    """Clip targets to the SINRs actually achieved and rates to their capacities."""
    table = sinr_table(beamformers, v, channels, structure)
    B = config.bandwidth_hz
    t_p = np.minimum(allocation.t_private, table.private)
    if mode == MODE_TIN:
        t_c = np.zeros_like(t_p)
    else:
        t_c = np.minimum(allocation.t_common, table.common_worst())
    t_p = np.where(t_p > config.t_floor, t_p, 0.0)
    t_c = np.where(t_c > config.t_floor, t_c, 0.0)
    r_p = np.minimum(allocation.rate_private, B * np.log2(1.0 + t_p))
    r_c = np.minimum(allocation.rate_common, B * np.log2(1.0 + t_c))
    return ExpansionPoint(beamformers, RateAllocation(r_p, r_c, t_p, t_c))


def _combine(current: ExpansionPoint, solution: Tuple[BeamformerSet, RateAllocation],
             step: float) -> Tuple[BeamformerSet, RateAllocation]:
    bf_hat, alloc_hat = solution
    if step >= 1.0:
        return bf_hat, alloc_hat
    bf, alloc = current.beamformers, current.allocation

    def mix(old, new):
        return old + step * (new - old)

    return (bf.replace(private=mix(bf.private, bf_hat.private), common=mix(bf.common, bf_hat.common)),
            RateAllocation(mix(alloc.rate_private, alloc_hat.rate_private),
                           mix(alloc.rate_common, alloc_hat.rate_common),
                           mix(alloc.t_private, alloc_hat.t_private),
                           mix(alloc.t_common, alloc_hat.t_common)))


def _relative_step(current: ExpansionPoint, solution: Tuple[BeamformerSet, RateAllocation]) -> float:
    bf_hat, alloc_hat = solution
    bf, alloc = current.beamformers, current.allocation
    w_old = np.concatenate([bf.private.ravel(), bf.common.ravel()])
    w_new = np.concatenate([bf_hat.private.ravel(), bf_hat.common.ravel()])
    t_old = np.concatenate([alloc.t_private, alloc.t_common])
    t_new = np.concatenate([alloc_hat.t_private, alloc_hat.t_common])
    step_w = np.linalg.norm(w_new - w_old) / max(np.linalg.norm(w_old), 1e-300)
    step_t = np.linalg.norm(t_new - t_old) / max(np.linalg.norm(t_old), 1e-300)
    return float(max(step_w, step_t))


def sca_iterate(channels: ChannelSet, v, structure: DecodingStructure, config: SystemConfig,
                start: ExpansionPoint,
                mode: str = MODE_RS) -> Tuple[BeamformerSet, RateAllocation, ScaTrace]:
    """Run the SCA loop from a starting point.

    Each iteration solves the subproblem at the current point and moves a
    fraction sca_step towards its solution. The loop stops when the
    relative power decrease falls below stop_epsilon, the step becomes
    stationary, or max_sca_iters is reached.

    Returns:
        Final beamformers, allocation and the run's trace
    """
    weights = config.weights_vector()
    trace = ScaTrace()
    current = start
    have_feasible = not start.qos_scaled
    if have_feasible:
        trace.objectives.append(total_power(start.beamformers, weights))
        if trace.objectives[0] == 0.0:
            trace.converged, trace.stop_reason = True, "zero power"
            return start.beamformers, start.allocation, trace

    for _ in range(config.max_sca_iters):
        program = build_subproblem(channels, v, structure, current, config, mode)
        solution = solve(program, config.solver_tol)
        trace.iterations += 1
        if not solution.usable:
            if have_feasible:
                trace.degraded = True
                logger.warning("Beamforming subproblem %s; keeping previous iterate", solution.status)
            else:
                trace.infeasible = True
            trace.stop_reason = solution.status
            break

        extracted = extract_solution(program, solution.x, current.beamformers)
        step = config.sca_step if have_feasible else 1.0
        bf_new, alloc_new = _combine(current, extracted, step)
        candidate = repair_point(bf_new, alloc_new, channels, v, structure, config, mode)
        power_new = total_power(candidate.beamformers, weights)

        if not have_feasible:
            current, have_feasible = candidate, True
            trace.objectives.append(power_new)
            if power_new == 0.0:
                trace.converged, trace.stop_reason = True, "zero power"
                break
            continue

        power_old = trace.objectives[-1]
        if power_new > power_old * (1.0 + DESCENT_SLACK):
            trace.converged, trace.stop_reason = True, "no descent"
            break
        moved = _relative_step(current, extracted)
        current = candidate
        trace.objectives.append(power_new)
        logger.debug("SCA iteration %d: power %.6e W", trace.iterations, power_new)
        if power_old - power_new < config.stop_epsilon * power_old:
            trace.converged, trace.stop_reason = True, "small decrease"
            break
        if moved < STATIONARY_STEP:
            trace.converged, trace.stop_reason = True, "stationary"
            break
    else:
        trace.stop_reason = "max iterations"

    return current.beamformers, current.allocation, trace
