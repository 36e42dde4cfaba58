"""
Monte Carlo experiment runner.

Each drop draws one topology, one channel realization and one set of power
weights, shared by every QoS point and scheme so schemes are compared on
paired channels. Drops run in a process pool and rows are sorted before
writing, so the CSV does not depend on completion order.
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
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import psutil

from core.config import SCHEMES, ExperimentConfig
from core.orchestrator import run_scheme
from core.result_store import ResultRow, ResultStore
from core.scenario import sample_drop
from utils.error_handling import ErrorReporter, ValidationError, safe_execute
from utils.file_utils import FileUtils
from utils.units import watts_to_dbm


logger = logging.getLogger(__name__)

SAVINGS = {
    'irs_saving_rs': ('rs_noirs', 'rs_irs'),
    'irs_saving_tin': ('tin_noirs', 'tin_irs'),
    'rs_saving_irs': ('tin_irs', 'rs_irs'),
    'rs_saving_noirs': ('tin_noirs', 'rs_noirs'),
    'combined_saving': ('tin_noirs', 'rs_irs'),
}


def drop_rng(seed: int, drop_id: int) -> np.random.Generator:
    """Random source of a drop's topology, channels and weights."""
    return np.random.default_rng([seed, drop_id])


def run_rng(seed: int, drop_id: int, qos_index: int, scheme: str) -> np.random.Generator:
    """Random source of one scheme run (Gaussian randomization)."""
    return np.random.default_rng([seed, drop_id, qos_index, SCHEMES.index(scheme)])


def run_drop(config: ExperimentConfig, drop_id: int) -> List[ResultRow]:
    """Run every QoS point and scheme on one drop.

    Args:
        config: Experiment settings
        drop_id: Index of the drop

    Returns:
        One ResultRow per (QoS point, scheme)
    """
    rng = drop_rng(config.seed, drop_id)
    _, channels = sample_drop(config.system, rng)
    low, high = config.weight_range
    weights = rng.uniform(low, high, size=config.system.n_users)
    system = config.system.with_overrides(power_weights=tuple(weights))
    channel_hash = channels.fingerprint()

    rows = []
    for qos_index, qos in enumerate(config.sweep_qos_bps):
        run_config = system.with_overrides(qos_min_bps=(qos,))
        for scheme in config.schemes:
            started = time.perf_counter()
            result = safe_execute(run_scheme, scheme, channels, run_config,
                                  run_rng(config.seed, drop_id, qos_index, scheme),
                                  context=f"drop {drop_id}, {scheme} at {qos:g} bps")
            elapsed = time.perf_counter() - started if config.record_wall_time else 0.0
            feasible = result is not None and result.feasible
            rows.append(ResultRow(
                drop_id=drop_id,
                scheme=scheme,
                qos_bps=float(qos),
                weighted_power_dbm=float(watts_to_dbm(result.weighted_power_w)) if feasible else math.nan,
                unweighted_power_dbm=float(watts_to_dbm(result.unweighted_power_w)) if feasible else math.nan,
                outer_iterations=result.outer_iterations if result is not None else 0,
                feasible=feasible,
                wall_time_s=float(elapsed),
                channel_hash=channel_hash,
            ))
    logger.info("Drop %d finished (%s)", drop_id, channel_hash)
    return rows


def _worker_count(config: ExperimentConfig) -> int:
    workers = config.workers or psutil.cpu_count(logical=False) or 1
    return max(1, min(int(workers), config.drops))


def run_experiment(config: ExperimentConfig,
                   error_reporter: Optional[ErrorReporter] = None) -> Tuple[List[ResultRow], Dict[str, Any]]:
    """Run all drops, write the result CSV and its summary.

    Args:
        config: Experiment settings
        error_reporter: Optional reporter for progress messages

    Returns:
        Tuple of (sorted rows, summary)

    Raises:
        ExperimentError: If the output path is unusable (checked before any solve)
    """
    store = ResultStore(config.output_path)
    store.validate()

    workers = _worker_count(config)
    message = (f"Running {config.drops} drops x {len(config.sweep_qos_bps)} QoS points x "
               f"{len(config.schemes)} schemes on {workers} worker(s)")
    if error_reporter:
        error_reporter.log_info(message)
    else:
        logger.info(message)

    started = time.perf_counter()
    rows: List[ResultRow] = []
    if workers == 1:
        for drop_id in range(config.drops):
            rows.extend(run_drop(config, drop_id))
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            for drop_rows in executor.map(run_drop, [config] * config.drops, range(config.drops)):
                rows.extend(drop_rows)
    rows.sort(key=ResultRow.sort_key)

    infeasible = sorted({row.drop_id for row in rows if not row.feasible})
    if infeasible:
        warning = (f"{sum(not row.feasible for row in rows)} of {len(rows)} runs infeasible "
                   f"(drops {infeasible})")
        if error_reporter:
            error_reporter.log_warning(warning)
        else:
            logger.warning(warning)

    summary = summarize(rows)
    summary['config'] = config.to_dict()
    store.write_rows(rows)
    store.write_summary(summary)
    logger.info("Wrote %d rows to %s in %s", len(rows), store.output_path,
                FileUtils.format_duration(time.perf_counter() - started))
    return rows, summary


def _qos_key(qos_bps: float) -> str:
    return f"{qos_bps / 1e6:g}"


def summarize(rows: Sequence[ResultRow]) -> Dict[str, Any]:
    """Aggregate rows per scheme and compare schemes on paired drops.

    Mean powers use feasible runs only. A zero rate floor gives zero power,
    recorded as -inf dBm; such points are left out of the slope. Savings are
    mean paired dB differences over drops where both schemes are feasible;
    the synergy is the combined saving minus the IRS-only and RS-only
    savings, over drops where all four schemes are feasible.

    Raises:
        ValidationError: If rows is empty
    """
    if not rows:
        raise ValidationError("Cannot summarize an empty result set")
    frame = pd.DataFrame([row.to_dict() for row in rows])
    qos_points = sorted(frame['qos_bps'].unique())

    schemes = {}
    for scheme, group in frame.groupby('scheme', sort=True):
        feasible = group[group['feasible']]
        mean_w = feasible.groupby('qos_bps')['weighted_power_dbm'].mean()
        mean_u = feasible.groupby('qos_bps')['unweighted_power_dbm'].mean()
        per_mbps = {_qos_key(q): float(mean_w[q] / (q / 1e6))
                    for q in mean_w.index if q > 0}
        finite_w = mean_w[np.isfinite(mean_w.to_numpy())]
        slope = None
        if len(finite_w) >= 2:
            slope = float(np.polyfit(np.asarray(finite_w.index) / 1e6, finite_w.to_numpy(), 1)[0])
        schemes[scheme] = {
            'runs': int(len(group)),
            'feasibility_rate': float(group['feasible'].mean()),
            'mean_weighted_dbm': {_qos_key(q): float(v) for q, v in mean_w.items()},
            'mean_unweighted_dbm': {_qos_key(q): float(v) for q, v in mean_u.items()},
            'dbm_per_mbps': per_mbps,
            'slope_dbm_per_mbps': slope,
        }

    powers = frame.assign(power=frame['weighted_power_dbm'].where(frame['feasible'])).pivot(
        index=['qos_bps', 'drop_id'], columns='scheme', values='power')
    savings = {}
    for q in qos_points:
        at_q = powers.xs(q, level='qos_bps')
        entry = {}
        for name, (worse, better) in SAVINGS.items():
            entry[name] = _paired_mean(at_q, worse, better)
        if at_q is not None and all(s in at_q.columns for s in SCHEMES):
            synergy = ((at_q['tin_noirs'] - at_q['rs_irs'])
                       - (at_q['tin_noirs'] - at_q['tin_irs'])
                       - (at_q['tin_noirs'] - at_q['rs_noirs']))
            entry['synergy'] = float(synergy.mean()) if synergy.notna().any() else None
        else:
            entry['synergy'] = None
        savings[_qos_key(q)] = entry

    return {'schemes': schemes, 'savings_db': savings, 'rows': int(len(frame))}


def _paired_mean(table: Optional[pd.DataFrame], worse: str, better: str) -> Optional[float]:
    if table is None or worse not in table.columns or better not in table.columns:
        return None
    diff = table[worse] - table[better]
    return float(diff.mean()) if diff.notna().any() else None
