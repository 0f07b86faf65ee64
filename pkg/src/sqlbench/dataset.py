"""Benchmark instances, database catalogs and SQLite schema introspection."""

from __future__ import annotations

import json
import logging
import sqlite3
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DataError
from .sqlanalysis import extract_entities

logger = logging.getLogger(__name__)

BIRD_JSON = "bird-json"
SPIDER_JSON = "spider-json"


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    type_name: str
    notnull: bool = False
    pk_index: int = 0  # 1-based position within the primary key, 0 if not part


@dataclass(frozen=True)
class ForeignKey:
    column: str
    ref_table: str
    ref_column: str


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple[ColumnInfo, ...]
    foreign_keys: tuple[ForeignKey, ...] = ()

    def __post_init__(self):
        if not self.columns:
            raise DataError(f"table {self.name!r} has no columns")
        seen: set[str] = set()
        for col in self.columns:
            key = col.name.lower()
            if key in seen:
                raise DataError(f"table {self.name!r} declares column {col.name!r} twice")
            seen.add(key)

    @property
    def primary_key(self) -> tuple[str, ...]:
        keyed = [c for c in self.columns if c.pk_index > 0]
        keyed.sort(key=lambda c: c.pk_index)
        return tuple(c.name for c in keyed)

    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def has_column(self, name: str) -> bool:
        target = name.lower()
        return any(c.name.lower() == target for c in self.columns)


class DatabaseCatalog:
    """Tables of one database, in declaration order, case-insensitive lookup."""

    def __init__(self, db_id: str, tables: list[TableSchema] | tuple[TableSchema, ...]):
        if not tables:
            raise DataError(f"database {db_id!r} contains no tables")
        self.db_id = db_id
        self.tables: tuple[TableSchema, ...] = tuple(tables)
        self._by_name: dict[str, TableSchema] = {}
        for table in self.tables:
            key = table.name.lower()
            if key in self._by_name:
                raise DataError(f"database {db_id!r} declares table {table.name!r} twice")
            self._by_name[key] = table

    def table_names(self) -> list[str]:
        return [t.name for t in self.tables]

    def has_table(self, name: str) -> bool:
        return name.lower() in self._by_name

    def get_table(self, name: str) -> TableSchema:
        try:
            return self._by_name[name.lower()]
        except KeyError:
            raise DataError(f"database {self.db_id!r} has no table {name!r}") from None

    def canonical_table(self, name: str) -> str | None:
        table = self._by_name.get(name.lower())
        return table.name if table else None

    def has_column(self, table: str, column: str) -> bool:
        schema = self._by_name.get(table.lower())
        return schema.has_column(column) if schema else False

    def foreign_keys(self) -> list[tuple[str, ForeignKey]]:
        """(table name, foreign key) pairs in declaration order."""
        out: list[tuple[str, ForeignKey]] = []
        for table in self.tables:
            for fk in table.foreign_keys:
                out.append((table.name, fk))
        return out


@dataclass
class BenchmarkInstance:
    id: str
    db_id: str
    question: str
    gold_sql: str
    evidence: str = ""
    gt_table_count: int | None = field(default=None)

    def __post_init__(self):
        if self.gt_table_count is None:
            self.gt_table_count = _gold_table_count(self.gold_sql)

    @property
    def stratum(self) -> str | None:
        if self.gt_table_count is None:
            return None
        if self.gt_table_count <= 1:
            return "1"
        if self.gt_table_count == 2:
            return "2"
        if self.gt_table_count == 3:
            return "3"
        return ">3"


def _gold_table_count(sql: str) -> int | None:
    try:
        return len(extract_entities(sql).tables)
    except Exception:
        return None


def compose_question(question: str, evidence: str = "", spaced: bool = False) -> str:
    """Join the question with its evidence note; they abut by default."""
    if not evidence:
        return question
    sep = " " if spaced else ""
    return f"{question}{sep}{evidence}"


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def load_instances(path: str | Path, format: str = BIRD_JSON, drop_unparseable: bool = True) -> list[BenchmarkInstance]:
    """Read instances from a benchmark JSON file.

    bird-json carries question_id/evidence/SQL keys; spider-json uses query
    and has neither ids nor evidence, so positions become ids. Instances
    whose gold SQL cannot be parsed are logged and dropped unless
    drop_unparseable is False, in which case they stay with an unknown
    table count.
    """
    if format not in (BIRD_JSON, SPIDER_JSON):
        raise ConfigError(f"unknown instance format {format!r}")
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read instance file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"instance file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise DataError(f"instance file {path} must contain a JSON array")
    instances: list[BenchmarkInstance] = []
    for index, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise DataError(f"instance #{index} in {path} is not an object")
        instance = _parse_entry(entry, index, format, path)
        if instance.gt_table_count is None:
            if drop_unparseable:
                logger.warning(
                    "dropping instance %s: gold SQL not parseable: %s",
                    instance.id,
                    instance.gold_sql[:120],
                )
                continue
            logger.warning("instance %s has unparseable gold SQL; keeping with unknown table count", instance.id)
        instances.append(instance)
    return instances


def _parse_entry(entry: dict, index: int, format: str, path: Path) -> BenchmarkInstance:
    if format == BIRD_JSON:
        sql_key = "SQL"
        id_value = entry.get("question_id", index)
        evidence = entry.get("evidence", "") or ""
    else:
        sql_key = "query"
        id_value = index
        evidence = ""
    for key in ("db_id", "question", sql_key):
        if key not in entry:
            raise DataError(f"instance #{index} in {path} lacks required key {key!r}")
    return BenchmarkInstance(
        id=str(id_value),
        db_id=str(entry["db_id"]),
        question=str(entry["question"]),
        gold_sql=str(entry[sql_key]),
        evidence=str(evidence),
    )


def stratify(instances: list[BenchmarkInstance]) -> dict[str, list[BenchmarkInstance]]:
    """Bucket instances by gold table count: '1', '2', '3', '>3'."""
    buckets: dict[str, list[BenchmarkInstance]] = {"1": [], "2": [], "3": [], ">3": []}
    for instance in instances:
        stratum = instance.stratum
        if stratum is not None:
            buckets[stratum].append(instance)
    return buckets


# ---------------------------------------------------------------------------
# SQLite introspection
# ---------------------------------------------------------------------------


def introspect_catalog(db_path: str | Path, db_id: str | None = None) -> DatabaseCatalog:
    """Build a catalog from a SQLite file via PRAGMA inspection."""
    db_path = Path(db_path)
    if not db_path.exists():
        raise DataError(f"database file not found: {db_path}")
    if db_id is None:
        db_id = db_path.stem
    uri = f"file:{db_path}?mode=ro"
    try:
        conn = sqlite3.connect(uri, uri=True)
    except sqlite3.Error as exc:
        raise DataError(f"cannot open database {db_path}: {exc}") from exc
    try:
        names = [
            row[0]
            for row in conn.execute(
                "SELECT name FROM sqlite_master WHERE type = 'table' ORDER BY rowid"
            )
        ]
        tables = [_introspect_table(conn, name) for name in names]
    except sqlite3.Error as exc:
        raise DataError(f"cannot introspect database {db_path}: {exc}") from exc
    finally:
        conn.close()
    if not tables:
        raise DataError(f"database {db_path} contains no tables")
    return DatabaseCatalog(db_id, tables)


def _introspect_table(conn: sqlite3.Connection, name: str) -> TableSchema:
    columns = [
        ColumnInfo(
            name=row[1],
            type_name=row[2] or "",
            notnull=bool(row[3]),
            pk_index=int(row[5]),
        )
        for row in conn.execute(f'PRAGMA table_info("{_pragma_name(name)}")')
    ]
    # rows are (id, seq, table, from, to, on_update, on_delete, match); sqlite
    # numbers ids from the last declared constraint, so undo that to recover
    # declaration order while keeping column order within a compound key
    fk_rows = sorted(
        conn.execute(f'PRAGMA foreign_key_list("{_pragma_name(name)}")'),
        key=lambda row: (-row[0], row[1]),
    )
    fks = []
    for row in fk_rows:
        ref_column = row[4] if row[4] is not None else row[3]
        fks.append(ForeignKey(column=row[3], ref_table=row[2], ref_column=ref_column))
    return TableSchema(name=name, columns=tuple(columns), foreign_keys=tuple(fks))


def _pragma_name(name: str) -> str:
    return name.replace('"', '""')


class DatabaseRegistry:
    """Maps db_id to SQLite files beneath a root; caches catalogs."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._catalogs: dict[str, DatabaseCatalog] = {}

    def resolve_db_path(self, db_id: str) -> Path:
        candidates = [
            self.root / db_id / f"{db_id}.sqlite",
            self.root / db_id / f"{db_id}.db",
            self.root / f"{db_id}.sqlite",
            self.root / f"{db_id}.db",
        ]
        for candidate in candidates:
            if candidate.exists():
                return candidate
        raise DataError(f"no database file for {db_id!r} under {self.root}")

    def catalog(self, db_id: str) -> DatabaseCatalog:
        if db_id not in self._catalogs:
            self._catalogs[db_id] = introspect_catalog(self.resolve_db_path(db_id), db_id)
        return self._catalogs[db_id]
