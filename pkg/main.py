#!/usr/bin/env python3
"""
Rate-splitting IRS power minimization experiments

Command-line front end that runs Monte Carlo sweeps of the rate-splitting
and treat-interference-as-noise schemes, with and without an intelligent
reflecting surface, and writes plot-ready CSV results.

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

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from core import __version__
from core.config import ConfigDocument
from core.experiment import run_experiment
from utils.error_handling import ErrorReporter, GlobalExceptionHandler, RsIrsError
from utils.file_utils import FileUtils


def check_dependencies() -> bool:
    """Check that a conic backend able to handle PSD and exponential cones is installed."""
    try:
        import cvxpy as cp
    except ImportError as e:
        print(f"Required dependency not found: {e}\n\n"
              "Please install dependencies with:\n"
              "pip install -r requirements.txt", file=sys.stderr)
        return False
    installed = cp.installed_solvers()
    if 'CLARABEL' not in installed and 'SCS' not in installed:
        print("No conic solver found (need CLARABEL or SCS).", file=sys.stderr)
        return False
    return True


def _comma_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(',') if item.strip()]


def _mbps_list(text: str) -> List[float]:
    try:
        return [float(item) * 1e6 for item in _comma_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated Mbps values, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Rate-splitting IRS-assisted multi-cell power minimization',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s --drops 5 --out results.csv
  %(prog)s --config sweep.json --sweep-qos 1,2,4,6
  %(prog)s --schemes rs_irs,tin_irs --seed 7 --no-timing
        """.strip()
    )
    parser.add_argument('--config', type=Path, help='JSON configuration file')
    parser.add_argument('--out', help='Result CSV path')
    parser.add_argument('--drops', type=int, help='Number of Monte Carlo channel drops')
    parser.add_argument('--seed', type=int, help='Master random seed')
    parser.add_argument('--schemes', type=_comma_list,
                        help='Comma-separated subset of rs_irs,rs_noirs,tin_irs,tin_noirs')
    parser.add_argument('--sweep-qos', type=_mbps_list, help='Comma-separated QoS floors in Mbps')
    parser.add_argument('--workers', type=int, help='Worker processes (default: physical cores)')
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Logging level')
    parser.add_argument('--log-dir', type=Path, help='Directory for rsirs.log')
    parser.add_argument('--no-timing', action='store_true',
                        help='Write zero wall times so repeated runs give identical CSVs')
    parser.add_argument('--version', action='version', version=f'rsirs v{__version__}')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the application."""
    args = build_parser().parse_args(argv)

    error_reporter = ErrorReporter(args.log_dir, getattr(logging, args.log_level))
    exception_handler = GlobalExceptionHandler(error_reporter)
    try:
        if not check_dependencies():
            return 1

        document = ConfigDocument(args.config)
        overrides = {
            'output_path': args.out,
            'drops': args.drops,
            'seed': args.seed,
            'schemes': args.schemes,
            'sweep_qos_bps': args.sweep_qos,
            'workers': args.workers,
        }
        for key, value in overrides.items():
            if value is not None:
                document.set(key, value)
        if args.no_timing:
            document.set('record_wall_time', False)

        config = document.to_experiment_config()
        rows, _ = run_experiment(config, error_reporter)
        config_file = FileUtils.config_path(document.get('output_path'))
        document.save(config_file)
        feasible = sum(row.feasible for row in rows)
        error_reporter.log_info(f"{feasible}/{len(rows)} runs feasible; results in "
                                f"{config.output_path}, configuration in {config_file}")
        return 0
    except RsIrsError as e:
        error_reporter.log_error(e, "experiment")
        return 1
    finally:
        exception_handler.restore()


if __name__ == "__main__":
    sys.exit(main())
