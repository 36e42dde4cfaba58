"""
Power unit conversions.

Powers are stored in watts everywhere inside the package; dBm only
appears at interfaces (configuration, CSV output, summaries).
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


import numpy as np
import astropy.units as u


def dbm_to_watts(value_dbm):
    """Convert dBm (scalar or array) to watts."""
    return (np.asarray(value_dbm, dtype=float) * u.dB(u.mW)).physical.to_value(u.W)


def watts_to_dbm(value_w):
    """Convert watts (scalar or array) to dBm.

    Zero power maps to -inf dBm.
    """
    value_w = np.asarray(value_w, dtype=float)
    with np.errstate(divide='ignore'):
        return (value_w * u.W).to_value(u.dB(u.mW))


def db_to_linear(value_db):
    """Convert a power ratio in dB to a linear factor."""
    return (np.asarray(value_db, dtype=float) * u.dB(u.dimensionless_unscaled)).to_value(u.dimensionless_unscaled)
