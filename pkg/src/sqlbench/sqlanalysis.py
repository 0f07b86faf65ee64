"""Entity extraction and structural comparison for SQL queries.

Pulls the base tables, columns and join conditions out of a parsed query,
resolving aliases through nested scopes, then compares two extractions to
decide whether a prediction queried too many, too few or simply different
entities. All names are lowercased; a catalog sharpens resolution but is
optional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ExtractionError
from . import sqlast as A

JoinPair = tuple[tuple[str, str], tuple[str, str]]


@dataclass(frozen=True)
class EntityRefs:
    """Canonical (lowercased) entities referenced by one query."""

    tables: frozenset[str]
    columns: frozenset[tuple[str, str]]  # (table, column); table '' when unresolved
    join_pairs: frozenset[JoinPair]

    @property
    def has_unresolved_columns(self) -> bool:
        return any(t == "" for t, _ in self.columns)


EQUAL = "equal"
PREDICTED_SUPERSET = "predicted_superset"
PREDICTED_SUBSET = "predicted_subset"
INCOMPARABLE = "incomparable"


@dataclass(frozen=True)
class StructuralDiff:
    """Set relations between gold and predicted entity extractions."""

    table_relation: str
    column_relation: str
    join_equal: bool
    degraded: bool  # column comparison fell back to name-only matching


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------


class _Scope:
    def __init__(self, parent: "_Scope | None" = None):
        self.parent = parent
        # alias (lowercased) -> table name, or None for derived sources
        self.aliases: dict[str, str | None] = {}
        self.tables: list[str] = []  # base tables visible in this scope
        self.select_aliases: set[str] = set()

    def lookup(self, alias: str) -> tuple[bool, str | None]:
        """Returns (found, table); table None means a derived source."""
        scope: _Scope | None = self
        while scope is not None:
            if alias in scope.aliases:
                return True, scope.aliases[alias]
            scope = scope.parent
        return False, None


class _Collector:
    def __init__(self, catalog=None):
        self.catalog = catalog
        self.tables: set[str] = set()
        self.columns: set[tuple[str, str]] = set()
        self.join_pairs: set[JoinPair] = set()
        self.cte_names: set[str] = set()

    # -- catalog helpers ----------------------------------------------------

    def _known_table(self, name: str) -> bool:
        return self.catalog is not None and self.catalog.has_table(name)

    def _table_has_column(self, table: str, column: str) -> bool:
        return self.catalog is not None and self.catalog.has_column(table, column)

    # -- query walking ------------------------------------------------------

    def collect(self, node: A.Node, scope: _Scope | None = None) -> None:
        if isinstance(node, A.WithQuery):
            for cte in node.ctes:
                self.cte_names.add(cte.name.lower())
            for cte in node.ctes:
                self.collect(cte.query, scope)
            self.collect(node.body, scope)
            return
        if isinstance(node, A.SetOp):
            left_scope = self._collect_operand(node.left, scope)
            self._collect_operand(node.right, scope)
            for term in node.order_by:
                self._walk_expr(term.expr, left_scope)
            return
        if isinstance(node, A.Select):
            self._collect_select(node, scope)
            return
        raise ExtractionError(f"unsupported query node {type(node).__name__}")

    def _collect_operand(self, node: A.Node, scope: _Scope | None) -> _Scope | None:
        if isinstance(node, A.Select):
            return self._collect_select(node, scope)
        self.collect(node, scope)
        return scope

    def _collect_select(self, select: A.Select, parent: _Scope | None) -> _Scope:
        scope = _Scope(parent)
        for item in select.from_items:
            self._register_from(item, scope, parent)
        for col in select.columns:
            if col.alias:
                scope.select_aliases.add(col.alias.lower())
        for col in select.columns:
            self._walk_expr(col.expr, scope)
        for item in select.from_items:
            self._harvest_join_condition(item, scope)
        if select.where is not None:
            self._walk_expr(select.where, scope)
            self._harvest_equalities(select.where, scope)
        for expr in select.group_by:
            self._walk_expr(expr, scope)
        if select.having is not None:
            self._walk_expr(select.having, scope)
        for term in select.order_by:
            self._walk_expr(term.expr, scope)
        if select.limit is not None:
            self._walk_expr(select.limit, scope)
        if select.offset is not None:
            self._walk_expr(select.offset, scope)
        return scope

    def _register_from(self, item: A.FromItem, scope: _Scope, parent: _Scope | None) -> None:
        source = item.source
        if isinstance(source, A.TableRef):
            name_l = source.name.lower()
            alias_l = (source.alias or source.name).lower()
            if name_l in self.cte_names:
                scope.aliases[alias_l] = None
                return
            self.tables.add(name_l)
            scope.aliases[alias_l] = name_l
            if source.alias and source.alias.lower() != name_l:
                # the bare table name still resolves when an alias exists
                scope.aliases.setdefault(name_l, name_l)
            scope.tables.append(name_l)
        elif isinstance(source, A.SubqueryRef):
            self.collect(source.query, parent)
            if source.alias:
                scope.aliases[source.alias.lower()] = None
        elif isinstance(source, A.FromGroup):
            for inner in source.items:
                self._register_from(inner, scope, parent)
        else:  # pragma: no cover - parser emits only the above
            raise ExtractionError(f"unsupported FROM source {type(source).__name__}")

    def _harvest_join_condition(self, item: A.FromItem, scope: _Scope) -> None:
        if item.on is not None:
            self._walk_expr(item.on, scope)
            self._harvest_equalities(item.on, scope)
        if item.using:
            right_table = None
            if isinstance(item.source, A.TableRef):
                name_l = item.source.name.lower()
                if name_l not in self.cte_names:
                    right_table = name_l
            for col in item.using:
                col_l = col.lower()
                left_table = self._using_left_table(col_l, right_table, scope)
                if right_table is not None:
                    self.columns.add((right_table, col_l))
                if left_table is not None:
                    self.columns.add((left_table, col_l))
                if left_table is not None and right_table is not None:
                    self._add_join_pair((left_table, col_l), (right_table, col_l))

    def _using_left_table(self, column: str, right_table: str | None, scope: _Scope) -> str | None:
        candidates = [t for t in scope.tables if t != right_table]
        if self.catalog is not None:
            candidates = [t for t in candidates if self._table_has_column(t, column)]
        if len(set(candidates)) == 1:
            return candidates[0]
        return None

    def _harvest_equalities(self, expr: A.Node, scope: _Scope) -> None:
        # conjuncts of the form t1.a = t2.b across distinct tables are joins
        if isinstance(expr, A.Binary) and expr.op == "AND":
            self._harvest_equalities(expr.left, scope)
            self._harvest_equalities(expr.right, scope)
            return
        if isinstance(expr, A.Binary) and expr.op == "=":
            left = self._resolve_if_column(expr.left, scope)
            right = self._resolve_if_column(expr.right, scope)
            if left and right and left[0] and right[0] and left[0] != right[0]:
                self._add_join_pair(left, right)

    def _resolve_if_column(self, expr: A.Node, scope: _Scope):
        if isinstance(expr, A.Collate):
            expr = expr.operand
        if isinstance(expr, A.ColumnRef):
            return self._resolve_column(expr, scope, record=False)
        return None

    def _add_join_pair(self, a: tuple[str, str], b: tuple[str, str]) -> None:
        self.join_pairs.add(tuple(sorted((a, b))))  # type: ignore[arg-type]

    # -- expression walking -------------------------------------------------

    def _walk_expr(self, expr: A.Node, scope: _Scope) -> None:
        if isinstance(expr, A.ColumnRef):
            self._resolve_column(expr, scope, record=True)
            return
        if isinstance(expr, A.Star):
            return
        if isinstance(expr, (A.Subquery, A.Exists)):
            self.collect(expr.query, scope)
            return
        if isinstance(expr, A.InExpr):
            self._walk_expr(expr.operand, scope)
            if expr.query is not None:
                self.collect(expr.query, scope)
            for item in expr.items or []:
                self._walk_expr(item, scope)
            return
        if isinstance(expr, A.Literal):
            return
        for child in A._children(expr):
            if isinstance(child, (A.Select, A.SetOp, A.WithQuery)):
                self.collect(child, scope)
            else:
                self._walk_expr(child, scope)

    def _resolve_column(self, ref: A.ColumnRef, scope: _Scope, record: bool):
        name_l = ref.name.lower()
        if ref.table:
            qual = ref.table.lower()
            found, table = scope.lookup(qual)
            if found and table is None:
                return None  # column of a derived source; base columns counted inside
            if not found:
                table = qual if self._known_table(qual) else None
            if table is None:
                resolved = ("", name_l)
            else:
                resolved = (table, name_l)
            if record:
                self.columns.add(resolved)
            return resolved
        if ref.quote == '"' and self.catalog is None:
            return None  # may be a string literal; cannot verify without a catalog
        resolved = self._resolve_unqualified(name_l, ref.quote, scope)
        if resolved is not None and record:
            self.columns.add(resolved)
        return resolved

    def _resolve_unqualified(self, name_l: str, quote: str | None, scope: _Scope):
        current: _Scope | None = scope
        while current is not None:
            # an output alias defined by the query itself is never a base column
            if name_l in current.select_aliases:
                return None
            current = current.parent
        current = scope
        while current is not None:
            unique = sorted(set(current.tables))
            if self.catalog is not None:
                matches = [t for t in unique if self._table_has_column(t, name_l)]
                if len(matches) >= 1:
                    return (matches[0], name_l) if len(matches) == 1 else ("", name_l)
            elif len(unique) == 1:
                return (unique[0], name_l)
            current = current.parent
        if quote == '"':
            return None  # unmatched double-quoted atom acts as a string literal
        return ("", name_l)


def extract_entities(sql: "str | A.Node", catalog=None) -> EntityRefs:
    """Extract base tables, columns and join pairs from a query.

    Raises SqlParseError for text the parser cannot handle and
    ExtractionError for query shapes outside the supported subset.
    """
    node = A.parse_sql(sql) if isinstance(sql, str) else sql
    collector = _Collector(catalog)
    collector.collect(node)
    return EntityRefs(
        tables=frozenset(collector.tables),
        columns=frozenset(collector.columns),
        join_pairs=frozenset(collector.join_pairs),
    )


def referenced_tables(sql: "str | A.Node", catalog=None) -> list[str]:
    """Sorted base tables of a query; convenience wrapper for linking."""
    return sorted(extract_entities(sql, catalog).tables)


# ---------------------------------------------------------------------------
# Structural comparison
# ---------------------------------------------------------------------------


def _relation(gold: frozenset, pred: frozenset) -> str:
    if pred == gold:
        return EQUAL
    if pred > gold:
        return PREDICTED_SUPERSET
    if pred < gold:
        return PREDICTED_SUBSET
    return INCOMPARABLE


def diff_structure(pred: EntityRefs, gold: EntityRefs) -> StructuralDiff:
    """Compare two extractions; unresolved columns force name-only matching.

    When either side contains a column whose table could not be determined,
    both column sets and both join-pair sets collapse to bare names before
    comparison, so one side's missing alias does not masquerade as a column
    mismatch.
    """
    table_relation = _relation(gold.tables, pred.tables)
    degraded = gold.has_unresolved_columns or pred.has_unresolved_columns
    if degraded:
        gold_cols = frozenset(name for _, name in gold.columns)
        pred_cols = frozenset(name for _, name in pred.columns)
        gold_joins = frozenset(_names_only(p) for p in gold.join_pairs)
        pred_joins = frozenset(_names_only(p) for p in pred.join_pairs)
    else:
        gold_cols = gold.columns
        pred_cols = pred.columns
        gold_joins = gold.join_pairs
        pred_joins = pred.join_pairs
    return StructuralDiff(
        table_relation=table_relation,
        column_relation=_relation(gold_cols, pred_cols),
        join_equal=gold_joins == pred_joins,
        degraded=degraded,
    )


def _names_only(pair: JoinPair) -> tuple[str, str]:
    (_, a), (_, b) = pair
    first, second = sorted((a, b))
    return first, second


# ---------------------------------------------------------------------------
# Table-list answers
# ---------------------------------------------------------------------------


def strip_to_tables(text: str, catalog=None) -> list[str]:
    """Parse a bracketed table list out of a model answer.

    Takes the first '['...']' span, tries JSON first and falls back to a
    comma split. Names are deduplicated in order; a catalog maps them onto
    canonical spellings and discards unknown tables.
    """
    start = text.find("[")
    if start < 0:
        raise ExtractionError("no table list found in answer")
    end = text.find("]", start)
    if end < 0:
        raise ExtractionError("unterminated table list in answer")
    span = text[start : end + 1]
    names: list[str] = []
    try:
        payload = json.loads(span)
        if isinstance(payload, list):
            names = [str(item) for item in payload]
        else:
            raise ValueError
    except (json.JSONDecodeError, ValueError):
        inner = span[1:-1]
        for part in inner.replace("\n", ",").split(","):
            cleaned = part.strip().strip("'\"`").strip()
            if cleaned:
                names.append(cleaned)
    seen: set[str] = set()
    out: list[str] = []
    for name in names:
        if catalog is not None:
            canonical = catalog.canonical_table(name)
            if canonical is None:
                continue
            name = canonical
        key = name.lower()
        if key not in seen:
            seen.add(key)
            out.append(name)
    if not out:
        raise ExtractionError("table list in answer was empty")
    return out
