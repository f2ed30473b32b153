"""
Plot-ready result tables: OutputRow and its CSV/JSON writers
"""
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import IO, Iterable, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.errors import DegenerateGainError
from services.analytics import coding_gains
from services.montecarlo import RatePoint

logger = logging.getLogger(__name__)

OUTPUT_COLUMNS = [
    "scheme", "source", "K", "N", "M", "delta", "q", "rate", "stderr",
    "trials", "g_a", "g_m", "large_clique_coverage", "error",
]

_FLOAT_COLUMNS = ("q", "rate", "stderr", "g_a", "g_m", "large_clique_coverage")


def round_sig(value: float) -> float:
    """Round to the 12 significant digits the tables print"""
    return float(f"{value:.12g}")


class OutputRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    scheme: str
    source: str
    K: int = Field(..., ge=1)
    N: int = Field(..., ge=1)
    M: int = Field(..., ge=0)
    delta: int = Field(default=1, ge=1)
    q: float
    rate: Optional[float] = None
    stderr: Optional[float] = None
    trials: Optional[int] = None
    g_a: Optional[float] = None
    g_m: Optional[float] = None
    large_clique_coverage: Optional[float] = None
    error: Optional[str] = None

    @field_validator(*_FLOAT_COLUMNS)
    @classmethod
    def _round(cls, v: Optional[float]) -> Optional[float]:
        return None if v is None else round_sig(v)


def make_row(point: RatePoint, uncoded_rate: Optional[float]) -> OutputRow:
    """Row for a RatePoint; gains are left blank where they are undefined"""
    g_a = g_m = None
    if uncoded_rate is not None:
        try:
            g_a, g_m = coding_gains(point.rate, uncoded_rate)
        except DegenerateGainError:
            pass
    return OutputRow(
        scheme=point.scheme.value,
        source=point.source.value,
        K=point.K,
        N=point.N,
        M=point.M,
        delta=point.delta,
        q=point.M / point.N,
        rate=point.rate,
        stderr=point.stderr,
        trials=point.trials,
        g_a=g_a,
        g_m=g_m,
        large_clique_coverage=point.large_clique_coverage,
    )


def error_row(scheme: str, source: str, K: int, N: int, M: int, delta: int, message: str) -> OutputRow:
    return OutputRow(
        scheme=scheme,
        source=source,
        K=max(K, 1),
        N=max(N, 1),
        M=max(M, 0),
        delta=max(delta, 1),
        q=M / N if N > 0 else 0.0,
        error=message,
    )


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_csv(rows: Iterable[OutputRow], stream: IO[str]):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(OUTPUT_COLUMNS)
    for row in rows:
        writer.writerow([_cell(getattr(row, column)) for column in OUTPUT_COLUMNS])


def write_json(rows: Iterable[OutputRow], stream: IO[str]):
    json.dump([row.model_dump() for row in rows], stream, indent=2)
    stream.write("\n")


def render(rows: List[OutputRow], fmt: str = "csv") -> str:
    buffer = io.StringIO()
    if fmt == "json":
        write_json(rows, buffer)
    else:
        write_csv(rows, buffer)
    return buffer.getvalue()


def emit(rows: List[OutputRow], out: Optional[str] = None, fmt: str = "csv"):
    """Write the table to `out`, or stdout when no path is given"""
    text = render(rows, fmt)
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.info(f"Wrote {len(rows)} rows to {path}")


def read_csv(source) -> List[OutputRow]:
    """Parse a table written by write_csv; empty cells become None"""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as f:
            return read_csv(f)
    rows = []
    for record in csv.DictReader(source):
        rows.append(OutputRow(**{key: value for key, value in record.items() if value != ""}))
    return rows
