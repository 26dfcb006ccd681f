from .cli import SweepConfig, build_parser, parse_cli
from .csv_io import emit_csv, read_csv, rows_to_frame
from .experiment import rows_from_report, run_experiment, weak_scaling_sweep

__all__ = [
    "SweepConfig",
    "build_parser",
    "emit_csv",
    "parse_cli",
    "read_csv",
    "rows_from_report",
    "rows_to_frame",
    "run_experiment",
    "weak_scaling_sweep",
]
