"""
Result storage for Monte Carlo experiments.

This module writes one row per (drop, QoS point, scheme) run to a CSV file
and the aggregate summary to a JSON file next to it, and reads both back.
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


import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Sequence

import pandas as pd

from utils.error_handling import ExperimentError
from utils.file_utils import FileUtils


@dataclass(frozen=True)
class ResultRow:
    """Outcome of one scheme on one drop at one QoS point.

    Powers are NaN for infeasible runs and -inf for feasible runs that
    need no power (a zero rate floor).
    """
    drop_id: int
    scheme: str
    qos_bps: float
    weighted_power_dbm: float
    unweighted_power_dbm: float
    outer_iterations: int
    feasible: bool
    wall_time_s: float
    channel_hash: str

    def sort_key(self):
        return (self.drop_id, self.qos_bps, self.scheme)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ResultRow':
        """Create from dictionary."""
        return cls(
            drop_id=int(data['drop_id']),
            scheme=str(data['scheme']),
            qos_bps=float(data['qos_bps']),
            weighted_power_dbm=float(data['weighted_power_dbm']),
            unweighted_power_dbm=float(data['unweighted_power_dbm']),
            outer_iterations=int(data['outer_iterations']),
            feasible=bool(data['feasible']),
            wall_time_s=float(data['wall_time_s']),
            channel_hash=str(data['channel_hash']),
        )


COLUMNS = [f.name for f in fields(ResultRow)]


def _json_safe(value):
    """Replace non-finite floats by None so the summary is strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


class ResultStore:
    """Reads and writes experiment results for one output path."""

    def __init__(self, output_path: str):
        """Initialize result store.

        Args:
            output_path: Path of the result CSV
        """
        self.output_path = Path(output_path)
        self.summary_path = FileUtils.summary_path(output_path)

    def validate(self):
        """Check the output location before any work is done.

        Raises:
            ExperimentError: If the CSV cannot be written there
        """
        ok, message = FileUtils.validate_output_path(str(self.output_path))
        if not ok:
            raise ExperimentError(message)

    def write_rows(self, rows: Sequence[ResultRow]) -> Path:
        """Write rows as CSV sorted by (drop, qos, scheme).

        Returns:
            Path of the written file
        """
        ordered = sorted(rows, key=ResultRow.sort_key)
        frame = pd.DataFrame([row.to_dict() for row in ordered], columns=COLUMNS)
        try:
            frame.to_csv(self.output_path, index=False, lineterminator='\n')
        except OSError as e:
            raise ExperimentError(f"Cannot write results to {self.output_path}: {e}") from e
        return self.output_path

    def read_rows(self) -> List[ResultRow]:
        """Read rows back with full float precision."""
        if not self.output_path.exists():
            raise ExperimentError(f"Result file not found: {self.output_path}")
        frame = pd.read_csv(self.output_path, float_precision="round_trip",
                            dtype={'scheme': str, 'channel_hash': str})
        return [ResultRow.from_dict(record) for record in frame.to_dict(orient='records')]

    def write_summary(self, summary: Dict[str, Any]) -> Path:
        try:
            with open(self.summary_path, 'w') as f:
                json.dump(_json_safe(summary), f, indent=2, sort_keys=True)
        except OSError as e:
            raise ExperimentError(f"Cannot write summary to {self.summary_path}: {e}") from e
        return self.summary_path

    def read_summary(self) -> Dict[str, Any]:
        try:
            with open(self.summary_path, 'r') as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ExperimentError(f"Cannot read summary {self.summary_path}: {e}") from e
