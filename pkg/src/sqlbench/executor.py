"""Read-only SQL execution, result-set comparison and query timing."""

from __future__ import annotations

import math
import sqlite3
import statistics
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError, TimingError, WriteStatementError
from .sqlast import has_top_level_order_by, statement_kind

DEFAULT_TIMEOUT = 60.0
FLOAT_TOLERANCE = 1e-6

OK = "ok"
ENGINE_ERROR = "engine_error"
TIMEOUT = "timeout"

_READ_KEYWORDS = {"SELECT", "WITH", "VALUES"}

# timing runs must never overlap with anything else touching the disk
_TIMING_LOCK = threading.Lock()


@dataclass(frozen=True)
class ExecutionOutcome:
    status: str
    rows: tuple | None = None
    error_message: str | None = None
    elapsed: float = 0.0

    def __post_init__(self):
        if (self.status == OK) != (self.rows is not None):
            raise ValueError("rows present iff status ok")
        if (self.status == ENGINE_ERROR) != (self.error_message is not None):
            raise ValueError("error_message present iff engine_error")


@dataclass(frozen=True)
class TimingProtocol:
    warmups: int = 1
    repetitions: int = 5
    aggregator: str = "median"

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.aggregator != "median":
            raise ValueError(f"unsupported aggregator {self.aggregator!r}")


@dataclass(frozen=True)
class TimingProfile:
    samples: tuple[float, ...]
    protocol: TimingProtocol
    efficiency: float = field(default=0.0)

    def __post_init__(self):
        if len(self.samples) != self.protocol.repetitions:
            raise ValueError("sample count must equal protocol repetitions")
        if self.efficiency <= 0:
            raise ValueError("efficiency must be positive")

    @property
    def aggregate(self) -> float:
        return statistics.median(self.samples)


def _open_readonly(db_path: str | Path) -> sqlite3.Connection:
    path = Path(db_path)
    if not path.exists():
        raise DataError(f"database file not found: {path}")
    uri = f"file:{path}?mode=ro"
    return sqlite3.connect(uri, uri=True, check_same_thread=False)


def execute(db_path: str | Path, sql: str, timeout: float = DEFAULT_TIMEOUT) -> ExecutionOutcome:
    """Run one read statement against a database file.

    Write statements are refused before touching the engine, and the file is
    additionally opened in read-only mode as a second line of defense. A
    query exceeding the budget is interrupted and reported as a timeout.
    """
    kind = statement_kind(sql)
    if kind not in _READ_KEYWORDS:
        raise WriteStatementError(f"refusing non-read statement starting with {kind or sql.strip()[:20]!r}")
    conn = _open_readonly(db_path)
    timer: threading.Timer | None = None
    timed_out = False

    def _interrupt():
        nonlocal timed_out
        timed_out = True
        conn.interrupt()

    try:
        if timeout and timeout > 0:
            timer = threading.Timer(timeout, _interrupt)
            timer.start()
        start = time.perf_counter()
        try:
            cursor = conn.execute(sql)
            rows = cursor.fetchall()
        except sqlite3.Error as exc:
            elapsed = time.perf_counter() - start
            if timed_out:
                return ExecutionOutcome(status=TIMEOUT, elapsed=elapsed)
            return ExecutionOutcome(status=ENGINE_ERROR, error_message=str(exc), elapsed=elapsed)
        elapsed = time.perf_counter() - start
        if timed_out:
            return ExecutionOutcome(status=TIMEOUT, elapsed=elapsed)
        return ExecutionOutcome(status=OK, rows=tuple(tuple(r) for r in rows), elapsed=elapsed)
    finally:
        if timer is not None:
            timer.cancel()
        conn.close()


# ---------------------------------------------------------------------------
# Result comparison
# ---------------------------------------------------------------------------


def _normalize_value(value):
    if isinstance(value, bool):
        return float(int(value))
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, bytes):
        return value
    return value  # str and None stay as-is; NULL never equals ""


def _normalize_row(row) -> tuple:
    return tuple(_normalize_value(v) for v in row)


def _values_equal(a, b) -> bool:
    if isinstance(a, float) and isinstance(b, float):
        if math.isnan(a) or math.isnan(b):
            return math.isnan(a) and math.isnan(b)
        return abs(a - b) <= FLOAT_TOLERANCE
    return a == b


def _rows_equal(row_a: tuple, row_b: tuple) -> bool:
    if len(row_a) != len(row_b):
        return False
    return all(_values_equal(a, b) for a, b in zip(row_a, row_b))


def _sort_key(row: tuple):
    # total order across mixed types for canonicalization only
    key = []
    for value in row:
        if value is None:
            key.append((0, ""))
        elif isinstance(value, float):
            key.append((1, value))
        elif isinstance(value, str):
            key.append((2, value))
        else:
            key.append((3, repr(value)))
    return key


def _multiset_match(rows_a: list[tuple], rows_b: list[tuple]) -> bool:
    if len(rows_a) != len(rows_b):
        return False
    if sorted(rows_a, key=_sort_key) == sorted(rows_b, key=_sort_key):
        return True
    # tolerant pairing for floats that sorted close together
    remaining = sorted(rows_b, key=_sort_key)
    for row in sorted(rows_a, key=_sort_key):
        for i, candidate in enumerate(remaining):
            if _rows_equal(row, candidate):
                del remaining[i]
                break
        else:
            return False
    return True


def results_match(pred: ExecutionOutcome, gold: ExecutionOutcome, gold_sql: str) -> bool:
    """Decide execution-accuracy equality of two outcomes.

    Rows are compared as multisets with column order preserved; row order
    only matters when the gold query itself orders its top-level result.
    Numbers match within an absolute tolerance of 1e-6.
    """
    if gold.status != OK:
        raise ValueError("gold outcome must be ok")
    if pred.status != OK:
        return False
    pred_rows = [_normalize_row(r) for r in pred.rows]
    gold_rows = [_normalize_row(r) for r in gold.rows]
    ordered = False
    try:
        ordered = has_top_level_order_by(gold_sql)
    except Exception:
        ordered = False
    if ordered:
        if len(pred_rows) != len(gold_rows):
            return False
        return all(_rows_equal(p, g) for p, g in zip(pred_rows, gold_rows))
    return _multiset_match(pred_rows, gold_rows)


# ---------------------------------------------------------------------------
# Timing
# ---------------------------------------------------------------------------


def time_query(
    db_path: str | Path,
    sql: str,
    protocol: TimingProtocol = TimingProtocol(),
    clock=None,
    timeout: float = DEFAULT_TIMEOUT,
) -> TimingProfile:
    """Measure a query's execution time under exclusive access.

    Runs the warmups, then the repetitions, each a full execute-and-fetch
    pass. A clock may be injected for reproducible tests; it is called
    around each repetition. Efficiency is the reciprocal of the median
    sample. Any failure during measurement raises TimingError, since a
    query that cannot be timed must not enter a VES ratio.
    """
    read_clock = clock if clock is not None else time.perf_counter
    with _TIMING_LOCK:
        conn = _open_readonly(db_path)
        try:
            for _ in range(protocol.warmups):
                _timed_run(conn, sql)
            samples = []
            for _ in range(protocol.repetitions):
                begin = read_clock()
                _timed_run(conn, sql)
                duration = read_clock() - begin
                if duration <= 0:
                    raise TimingError(f"non-positive duration {duration!r} measured")
                samples.append(duration)
        finally:
            conn.close()
    aggregated = statistics.median(samples)
    return TimingProfile(
        samples=tuple(samples),
        protocol=protocol,
        efficiency=1.0 / aggregated,
    )


def _timed_run(conn: sqlite3.Connection, sql: str) -> None:
    try:
        conn.execute(sql).fetchall()
    except sqlite3.Error as exc:
        raise TimingError(f"query failed during timing: {exc}") from exc


def efficiency_ratio(pred_profile: TimingProfile, gold_profile: TimingProfile) -> float:
    """R value of one instance: sqrt of predicted over gold efficiency."""
    return math.sqrt(pred_profile.efficiency / gold_profile.efficiency)
