"""
CLI for RAS solver experiments on the 3D Poisson model problem.
Usage:
  python -m scripts.schwarz run --variant sync-1l --grid 8x8x8 --proc 2x2x2 [--overlap 2] [--eps 1e-6]
  python -m scripts.schwarz run --variant async-2l-accurate --grid 8x8x8 --proc 2x2x2 --delay uniform:0:10 --reps 5
  python -m scripts.schwarz sweep --variants sync-1l,sync-2l --local 10x10x10 --procs 2x2x2 --procs 3x3x3 --csv out.csv

Exit codes: 0 success, 1 non-convergence, 2 configuration error, 3 I/O error.
"""
import sys
from pathlib import Path

# Ensure app is on path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from app.errors import ConfigurationError, WorkbenchError
from app.harness import SweepConfig, emit_csv, parse_cli, run_experiment, weak_scaling_sweep
from app.logging_config import configure_logging, get_logger

EXIT_OK = 0
EXIT_NONCONVERGED = 1
EXIT_CONFIG = 2
EXIT_IO = 3

logger = get_logger("scripts.schwarz")


def main(argv: list[str] | None = None) -> int:
    try:
        args, config = parse_cli(argv)
    except ConfigurationError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        configure_logging(args.log_level)
    except ConfigurationError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if isinstance(config, SweepConfig):
            rows = weak_scaling_sweep(config.base, config.procs, config.local, config.variants)
            base = config.base
        else:
            rows = run_experiment(config)
            base = config
    except ConfigurationError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_IO
    except WorkbenchError as e:
        logger.error("run_failed", extra={"error": str(e)})
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NONCONVERGED

    try:
        emit_csv(rows, base.csv_path)
    except OSError as e:
        print(f"Error: cannot write CSV: {e}", file=sys.stderr)
        return EXIT_IO

    failed = sorted({row.run_id for row in rows if not row.converged})
    if failed and not base.allow_nonconverged:
        print(f"Not converged: {', '.join(failed)}", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
