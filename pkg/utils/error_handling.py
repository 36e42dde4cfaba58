"""
Error handling and logging for the rsirs toolkit.

This module provides centralized logging setup, the exception hierarchy
used across the package, and parameter validation helpers.
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


import sys
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple


LOGGER_NAME = 'rsirs'


class ErrorReporter:
    """Centralized error reporting system."""

    def __init__(self, log_dir: Optional[Path] = None, level: int = logging.INFO):
        self.log_dir = Path(log_dir) if log_dir is not None else None
        self.log_file = self.log_dir / "rsirs.log" if self.log_dir is not None else None
        self.level = level
        self.setup_logging()

    def setup_logging(self):
        """Set up logging configuration."""
        handlers = [logging.StreamHandler(sys.stdout)]
        if self.log_file is not None:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            handlers.insert(0, logging.FileHandler(self.log_file))
        logging.basicConfig(
            level=self.level,
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            handlers=handlers,
            force=True
        )
        self.logger = logging.getLogger(LOGGER_NAME)

    def log_error(self, error: Exception, context: str = ""):
        """Log an error with context."""
        error_msg = f"Error in {context}: {str(error)}"
        self.logger.error(error_msg, exc_info=True)

    def log_info(self, message: str):
        """Log an informational message."""
        self.logger.info(message)

    def log_warning(self, message: str):
        """Log a warning message."""
        self.logger.warning(message)


class GlobalExceptionHandler:
    """Global exception handler for unhandled exceptions."""

    def __init__(self, error_reporter: ErrorReporter):
        self.error_reporter = error_reporter
        self.original_excepthook = sys.excepthook
        sys.excepthook = self.handle_exception

    def handle_exception(self, exc_type, exc_value, exc_traceback):
        """Handle unhandled exceptions."""
        if issubclass(exc_type, KeyboardInterrupt):
            self.original_excepthook(exc_type, exc_value, exc_traceback)
            return

        self.error_reporter.log_error(exc_value, "Unhandled exception")
        self.original_excepthook(exc_type, exc_value, exc_traceback)

    def restore(self):
        """Reinstall the hook that was active before this handler."""
        sys.excepthook = self.original_excepthook


def safe_execute(func, *args, error_reporter: Optional[ErrorReporter] = None,
                 context: str = "", **kwargs):
    """Safely execute a function with error handling.

    Returns None when the call raised.
    """
    try:
        return func(*args, **kwargs)
    except Exception as e:
        if error_reporter:
            error_reporter.log_error(e, context)
        else:
            logging.getLogger(LOGGER_NAME).exception("Error in %s: %s", context, e)
        return None


class RsIrsError(Exception):
    """Base exception for the package."""
    pass


class ValidationError(RsIrsError, ValueError):
    """Exception for invalid inputs and parameters."""
    pass


class ConfigurationError(RsIrsError):
    """Exception for configuration errors."""
    pass


class SolverError(RsIrsError):
    """Exception for numerical breakdown in the conic backend."""
    pass


class ExperimentError(RsIrsError):
    """Exception for experiment run and output errors."""
    pass


def validate_parameter_ranges(parameters: Dict[str, Any],
                              param_ranges: Dict[str, Tuple[Optional[float], Optional[float]]],
                              open_lower: Tuple[str, ...] = ()) -> bool:
    """Validate scalar parameters against a table of (min, max) ranges.

    Args:
        parameters: Mapping of parameter names to values
        param_ranges: Mapping of parameter names to (min, max); None means unbounded
        open_lower: Names whose lower bound is exclusive

    Returns:
        True if every present parameter is within range

    Raises:
        ValidationError: If a parameter is out of range or not finite
    """
    for param, (min_val, max_val) in param_ranges.items():
        if param not in parameters:
            continue
        value = parameters[param]
        if value is None or value != value:
            raise ValidationError(f"Parameter {param} must be a number, got {value}")
        if min_val is not None:
            if param in open_lower and value <= min_val:
                raise ValidationError(f"Parameter {param} ({value}) must be above {min_val}")
            if value < min_val:
                raise ValidationError(f"Parameter {param} ({value}) below minimum ({min_val})")
        if max_val is not None and value > max_val:
            raise ValidationError(f"Parameter {param} ({value}) above maximum ({max_val})")

    return True
