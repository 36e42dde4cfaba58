"""
Configuration management for the rsirs toolkit.

Handles system parameters, experiment settings and the JSON
configuration document read by the command line front-end.
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


import copy
import json
import math
from dataclasses import dataclass, field, fields, asdict, replace
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from utils.error_handling import ConfigurationError, ValidationError, validate_parameter_ranges
from utils.units import dbm_to_watts


SCHEMES = ("rs_irs", "rs_noirs", "tin_irs", "tin_noirs")

# (min, max) per scalar field; None means unbounded
SYSTEM_PARAM_RANGES = {
    'n_bs': (1, None),
    'antennas_per_bs': (1, None),
    'n_users': (1, None),
    'n_reflect': (1, None),
    'bandwidth_hz': (0.0, None),
    'decode_group_max': (1, None),
    'n_randomizations': (1, None),
    'penalty_tradeoff': (0.0, 1.0),
    'sca_step': (0.0, 1.0),
    'stop_epsilon': (0.0, None),
    'max_outer_iters': (1, None),
    'area_halfwidth_m': (0.0, None),
    'shadowing_std_db': (0.0, None),
    'min_distance_km': (0.0, None),
    'max_sca_iters': (1, None),
    'sdp_inner_repeats': (1, None),
    'solver_tol': (0.0, 1.0),
    'init_power_cap_w': (0.0, None),
    'qos_rate_tol_rel': (0.0, None),
    'qos_rate_tol_abs_bps': (0.0, None),
    'sinr_screen_tol': (0.0, None),
    't_floor': (0.0, None),
}

# Parameters whose lower bound is exclusive
SYSTEM_OPEN_LOWER = (
    'bandwidth_hz', 'penalty_tradeoff', 'sca_step', 'stop_epsilon',
    'min_distance_km', 'solver_tol', 'init_power_cap_w', 't_floor',
)

INT_FIELDS = (
    'n_bs', 'antennas_per_bs', 'n_users', 'n_reflect', 'decode_group_max',
    'n_randomizations', 'max_outer_iters', 'rng_seed', 'max_sca_iters',
    'sdp_inner_repeats',
)

# Per-user parameters given as one value or one value per user
PER_USER_FIELDS = ('qos_min_bps', 'power_weights')


def _broadcast(value: Union[float, Sequence[float]], size: int, name: str) -> Tuple[float, ...]:
    """Broadcast a scalar or per-user sequence to a tuple of length size."""
    if np.isscalar(value):
        return tuple(float(value) for _ in range(size))
    values = tuple(float(x) for x in value)
    if len(values) == 1:
        return values * size
    if len(values) != size:
        raise ValidationError(f"{name} has {len(values)} entries, expected {size}")
    return values


@dataclass(frozen=True)
class SystemConfig:
    """Network, algorithm and numerical parameters of one optimization run."""
    n_bs: int = 4
    antennas_per_bs: int = 4
    n_users: int = 6
    n_reflect: int = 15
    bandwidth_hz: float = 10e6
    noise_dbm_per_hz: float = -169.0
    qos_min_bps: Tuple[float, ...] = (4e6,)
    power_weights: Tuple[float, ...] = (1.0,)
    decode_group_max: int = 2
    n_randomizations: int = 25
    penalty_tradeoff: float = 0.9
    sca_step: float = 1.0
    stop_epsilon: float = 1e-3
    max_outer_iters: int = 20
    area_halfwidth_m: float = 500.0
    rng_seed: int = 0

    # Channel model
    shadowing_std_db: float = 8.0
    min_distance_km: float = 0.001

    # Solver and loop controls
    max_sca_iters: int = 30
    sdp_inner_repeats: int = 1
    solver_tol: float = 1e-8
    init_power_cap_w: float = 1e6
    include_principal_candidate: bool = True

    # Feasibility tolerances
    qos_rate_tol_rel: float = 1e-6
    qos_rate_tol_abs_bps: float = 1.0
    sinr_screen_tol: float = 1e-9
    t_floor: float = 1e-8

    def __post_init__(self):
        for name in INT_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not float(value).is_integer():
                raise ValidationError(f"Parameter {name} must be an integer, got {value}")
            object.__setattr__(self, name, int(value))
        object.__setattr__(self, 'qos_min_bps',
                           _broadcast(self.qos_min_bps, self.n_users, 'qos_min_bps'))
        object.__setattr__(self, 'power_weights',
                           _broadcast(self.power_weights, self.n_users, 'power_weights'))
        self.validate()

    def validate(self) -> bool:
        """Validate all parameters.

        Raises:
            ValidationError: If any parameter is out of range
        """
        validate_parameter_ranges(asdict(self), SYSTEM_PARAM_RANGES, SYSTEM_OPEN_LOWER)
        if not math.isfinite(self.noise_dbm_per_hz):
            raise ValidationError("noise_dbm_per_hz must be finite")
        for k, w in enumerate(self.power_weights):
            if not (w > 0 and math.isfinite(w)):
                raise ValidationError(f"power_weights[{k}] ({w}) must be positive")
        for k, r in enumerate(self.qos_min_bps):
            if not (r >= 0 and math.isfinite(r)):
                raise ValidationError(f"qos_min_bps[{k}] ({r}) must be non-negative")
        return True

    @property
    def n_tx(self) -> int:
        """Total number of transmit antennas N*L."""
        return self.n_bs * self.antennas_per_bs

    @property
    def noise_power_w(self) -> float:
        """Receiver noise power over the full bandwidth in watts."""
        return float(dbm_to_watts(self.noise_dbm_per_hz)) * self.bandwidth_hz

    def qos_vector(self) -> np.ndarray:
        return np.asarray(self.qos_min_bps, dtype=float)

    def weights_vector(self) -> np.ndarray:
        return np.asarray(self.power_weights, dtype=float)

    def with_overrides(self, **changes) -> 'SystemConfig':
        """Return a copy with the given fields replaced."""
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        data = asdict(self)
        data['qos_min_bps'] = list(self.qos_min_bps)
        data['power_weights'] = list(self.power_weights)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SystemConfig':
        """Create from dictionary, rejecting unknown keys."""
        _reject_unknown(data, {f.name for f in fields(cls)}, 'system')
        return cls(**data)


@dataclass(frozen=True)
class ExperimentConfig:
    """Monte Carlo sweep settings."""
    system: SystemConfig = field(default_factory=SystemConfig)
    sweep_qos_bps: Tuple[float, ...] = (4e6,)
    drops: int = 20
    schemes: Tuple[str, ...] = SCHEMES
    output_path: str = "results.csv"
    seed: int = 0
    workers: Optional[int] = None
    weight_range: Tuple[float, float] = (1.0, 2.0)
    record_wall_time: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'sweep_qos_bps', tuple(float(q) for q in self.sweep_qos_bps))
        object.__setattr__(self, 'schemes', tuple(self.schemes))
        object.__setattr__(self, 'weight_range', tuple(float(w) for w in self.weight_range))
        self.validate()

    def validate(self) -> bool:
        """Validate sweep settings.

        Raises:
            ValidationError: If the sweep is empty or a field is out of range
        """
        if not self.sweep_qos_bps:
            raise ValidationError("QoS sweep must not be empty")
        if any(not (q >= 0 and math.isfinite(q)) for q in self.sweep_qos_bps):
            raise ValidationError(f"QoS sweep values must be non-negative: {self.sweep_qos_bps}")
        if int(self.drops) != self.drops or self.drops < 1:
            raise ValidationError(f"drops ({self.drops}) must be a positive integer")
        if not self.schemes:
            raise ValidationError("At least one scheme is required")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ValidationError(f"Unknown schemes {unknown}; expected a subset of {list(SCHEMES)}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ValidationError(f"Duplicate schemes in {list(self.schemes)}")
        if self.workers is not None and self.workers < 1:
            raise ValidationError(f"workers ({self.workers}) must be at least 1")
        if len(self.weight_range) != 2 or not (0 < self.weight_range[0] <= self.weight_range[1]):
            raise ValidationError(f"weight_range {self.weight_range} must satisfy 0 < low <= high")
        return True

    def with_overrides(self, **changes) -> 'ExperimentConfig':
        """Return a copy with the given fields replaced."""
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'system': self.system.to_dict(),
            'sweep_qos_bps': list(self.sweep_qos_bps),
            'drops': self.drops,
            'schemes': list(self.schemes),
            'output_path': self.output_path,
            'seed': self.seed,
            'workers': self.workers,
            'weight_range': list(self.weight_range),
            'record_wall_time': self.record_wall_time,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        """Create from dictionary, rejecting unknown keys."""
        _reject_unknown(data, {f.name for f in fields(cls)}, '')
        data = dict(data)
        if 'system' in data:
            data['system'] = SystemConfig.from_dict(data['system'])
        return cls(**data)


def _document_defaults() -> Dict[str, Any]:
    """Default document, with per-user settings left as single values."""
    defaults = ExperimentConfig().to_dict()
    for f in fields(SystemConfig):
        if f.name in PER_USER_FIELDS:
            defaults['system'][f.name] = list(f.default)
    return defaults


def _reject_unknown(data: Dict[str, Any], known: Iterable[str], prefix: str):
    if not isinstance(data, dict):
        raise ConfigurationError(f"Expected an object at '{prefix or '<root>'}'")
    unknown = sorted(set(data) - set(known))
    if unknown:
        where = f" in '{prefix}'" if prefix else ""
        raise ConfigurationError(f"Unknown configuration keys{where}: {unknown}")


class ConfigDocument:
    """JSON experiment configuration document.

    The document mirrors ExperimentConfig field names, with the system
    parameters nested under "system". Values are merged over the defaults.
    """

    def __init__(self, config_file: Optional[Path] = None):
        """Initialize the document.

        Args:
            config_file: JSON file to load. If None, only defaults are used.

        Raises:
            ConfigurationError: If the file cannot be read or has unknown keys
        """
        self.config_file = Path(config_file) if config_file is not None else None
        self.defaults = _document_defaults()
        self.config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from file merged over defaults."""
        if self.config_file is None:
            return copy.deepcopy(self.defaults)
        try:
            with open(self.config_file, 'r') as f:
                loaded = json.load(f)
        except (json.JSONDecodeError, IOError) as e:
            raise ConfigurationError(f"Failed to load config file {self.config_file}: {e}")
        self._check_keys(self.defaults, loaded, '')
        return self._merge_configs(self.defaults, loaded)

    def _check_keys(self, default: Dict, loaded: Any, prefix: str):
        """Recursively reject keys that have no default."""
        _reject_unknown(loaded, default.keys(), prefix)
        for key, value in loaded.items():
            if isinstance(default[key], dict):
                self._check_keys(default[key], value, f"{prefix}{key}.")

    def _merge_configs(self, default: Dict, loaded: Dict) -> Dict:
        """Recursively merge loaded config with defaults."""
        result = copy.deepcopy(default)
        for key, value in loaded.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_configs(result[key], value)
            else:
                result[key] = value
        return result

    def get(self, key_path: str, default=None):
        """Get configuration value using dot notation.

        Args:
            key_path: Dot-separated path to config value (e.g., "system.n_users")
            default: Default value if key not found

        Returns:
            Configuration value or default
        """
        keys = key_path.split('.')
        value = self.config

        try:
            for key in keys:
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key_path: str, value: Any):
        """Set configuration value using dot notation.

        Args:
            key_path: Dot-separated path to config value
            value: Value to set

        Raises:
            ConfigurationError: If the path does not name a known setting
        """
        keys = key_path.split('.')
        config = self.config
        defaults = self.defaults

        for key in keys[:-1]:
            if key not in defaults or not isinstance(defaults[key], dict):
                raise ConfigurationError(f"Unknown configuration section: {key_path}")
            config = config[key]
            defaults = defaults[key]
        if keys[-1] not in defaults:
            raise ConfigurationError(f"Unknown configuration key: {key_path}")

        config[keys[-1]] = value

    def save(self, path: Path):
        """Save the merged configuration to a JSON file."""
        try:
            with open(path, 'w') as f:
                json.dump(self.config, f, indent=2)
        except IOError as e:
            raise ConfigurationError(f"Failed to save config file {path}: {e}")

    def to_experiment_config(self) -> ExperimentConfig:
        """Build a validated ExperimentConfig from the document.

        Raises:
            ConfigurationError: If a value is invalid
        """
        try:
            return ExperimentConfig.from_dict(self.config)
        except (ValidationError, TypeError) as e:
            raise ConfigurationError(f"Invalid configuration: {e}")
