"""
CSV emission and reading for experiment rows. Fixed column order, '.' decimal point, '\\n' line ends.
"""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Sequence

import pandas as pd

from app.errors import ContractViolation
from app.logging_config import get_logger
from app.models import CSV_COLUMNS, CsvRow

logger = get_logger(__name__)


def rows_to_frame(rows: Sequence[CsvRow]) -> pd.DataFrame:
    records = [row.model_dump(mode="json") for row in rows]
    return pd.DataFrame.from_records(records, columns=list(CSV_COLUMNS))


def emit_csv(rows: Sequence[CsvRow], path: Path | None = None) -> None:
    """Write header + rows to `path` (stdout when None). OSError propagates to the caller."""
    if not rows:
        raise ContractViolation("no rows to emit")
    df = rows_to_frame(rows)
    if path is None:
        df.to_csv(sys.stdout, index=False, lineterminator="\n")
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n")
    logger.info("csv_written", extra={"path": str(path)})


def read_csv(path: Path) -> list[CsvRow]:
    df = pd.read_csv(path, dtype={"run_id": str, "variant": str})
    if tuple(df.columns) != CSV_COLUMNS:
        raise ContractViolation(f"unexpected CSV header in {path}: {list(df.columns)}")
    return [CsvRow(**record) for record in df.to_dict(orient="records")]
