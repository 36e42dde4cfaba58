"""
File utilities for experiment outputs.

This module provides path validation for result files and
small formatting helpers used in log messages.
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


import os
from pathlib import Path
from typing import List, Optional, Tuple


class FileUtils:
    """Utility functions for file operations."""

    @staticmethod
    def get_output_formats() -> List[str]:
        """Get supported result file extensions."""
        return ['.csv']

    @staticmethod
    def summary_path(output_path: str) -> Path:
        """Get the summary file path that accompanies a result CSV.

        Args:
            output_path: Path of the result CSV

        Returns:
            Path with the same stem and a .summary.json suffix
        """
        path = Path(output_path)
        return path.with_name(f"{path.stem}.summary.json")

    @staticmethod
    def config_path(output_path: str) -> Path:
        """Get the path of the resolved configuration saved with a result CSV."""
        path = Path(output_path)
        return path.with_name(f"{path.stem}.config.json")

    @staticmethod
    def validate_output_path(output_path: str) -> Tuple[bool, Optional[str]]:
        """Validate output file path.

        Args:
            output_path: Proposed output path

        Returns:
            Tuple of (is_valid, error_message)
        """
        path = Path(output_path)

        # Check if parent directory exists or can be created
        parent_dir = path.parent
        if not parent_dir.exists():
            try:
                parent_dir.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                return False, f"Cannot create output directory: {e}"

        if not parent_dir.is_dir():
            return False, f"Output parent is not a directory: {parent_dir}"

        if not os.access(parent_dir, os.W_OK):
            return False, f"Output directory is not writable: {parent_dir}"

        if path.is_dir():
            return False, f"Output path is a directory: {output_path}"

        if path.exists() and not os.access(path, os.W_OK):
            return False, f"Output file exists and is not writable: {output_path}"

        if path.suffix.lower() not in FileUtils.get_output_formats():
            return False, f"Unsupported output format: {path.suffix}"

        return True, None

    @staticmethod
    def format_duration(seconds: float) -> str:
        """Format a wall time in human-readable form.

        Args:
            seconds: Duration in seconds

        Returns:
            Formatted duration string
        """
        if seconds < 60.0:
            return f"{seconds:.1f} s"
        minutes, secs = divmod(seconds, 60.0)
        if minutes < 60.0:
            return f"{int(minutes)} min {secs:.0f} s"
        hours, minutes = divmod(minutes, 60.0)
        return f"{int(hours)} h {int(minutes)} min"
