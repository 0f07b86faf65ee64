"""Prioritized error taxonomy for wrong SQL predictions.

A failed execution is a system error carrying the engine's message. A wrong
result is classified by structural rules (tables, then columns, then join
conditions), and only when the structures agree is an LLM asked to separate
condition-filter from data-processing mistakes. Each result category owns a
fixed annotation comment used by the strongest debugging prompts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .errors import ExtractionError
from . import sqlanalysis
from .executor import ExecutionOutcome, OK

SYSTEM_ERROR = "system_error"
RESULT_ERROR = "result_error"

EXCESSIVE_TABLES = "excessive_tables"
MISSING_TABLES = "missing_tables"
INCORRECT_TABLES = "incorrect_tables"
EXCESSIVE_COLUMNS = "excessive_columns"
MISSING_COLUMNS = "missing_columns"
INCORRECT_COLUMNS = "incorrect_columns"
JOIN_COLUMNS = "join_columns"
CONDITION_FILTER = "condition_filter"
DATA_PROCESSING = "data_processing"

SUBCATEGORIES = (
    EXCESSIVE_TABLES,
    MISSING_TABLES,
    INCORRECT_TABLES,
    EXCESSIVE_COLUMNS,
    MISSING_COLUMNS,
    INCORRECT_COLUMNS,
    JOIN_COLUMNS,
    CONDITION_FILTER,
    DATA_PROCESSING,
)

_COMMENTS = {
    EXCESSIVE_TABLES: "The tables you inquired about is incorrect, you query too much tables.",
    MISSING_TABLES: "The tables you inquired about is incorrect, you need to query more tables.",
    INCORRECT_TABLES: "The tables you inquired about is incorrect.",
    EXCESSIVE_COLUMNS: (
        "You have found the correct tables.\n"
        "But you select wrong columns,you select too much Columns."
    ),
    MISSING_COLUMNS: (
        "You have found the correct tables.\n"
        "But you select wrong columns,you need to select more Columns."
    ),
    INCORRECT_COLUMNS: "You have found the correct tables.But you select wrong columns.",
    JOIN_COLUMNS: (
        "You have found the correct tables.\n"
        "You have selected the correct Columns.\n"
        "But you combine wrong rows when JOIN two tables."
    ),
    CONDITION_FILTER: (
        "You have found the correct tables.You have selected the correct Columns.\n"
        "You have combined (JOIN) the correct tables.\n"
        "But an error occurred in the conditional filter."
    ),
    DATA_PROCESSING: (
        "You have found the correct tables.\n"
        "You have selected the correct Columns.\n"
        "You have combined (JOIN) the correct tables.\n"
        "You have used the correct conditional filtering.\n"
        "But there was an error in your processing of the data."
    ),
}

_DISPLAY = {
    EXCESSIVE_TABLES: "Excessive Tables",
    MISSING_TABLES: "Missing Tables",
    INCORRECT_TABLES: "Incorrect Tables",
    EXCESSIVE_COLUMNS: "Excessive Columns",
    MISSING_COLUMNS: "Missing Columns",
    INCORRECT_COLUMNS: "Incorrect Columns",
    JOIN_COLUMNS: "Join Columns",
    CONDITION_FILTER: "Condition Filter",
    DATA_PROCESSING: "Data Processing",
}

# statement printed to a model when a query ran but returned wrong rows
RESULT_ERROR_NOTICE = "Executed correctly, but with the wrong result."

RULES = "rules"
LLM = "llm"
FALLBACK_UNVERIFIED = "fallback_unverified"
PARSE_DEGRADED = "parse_degraded"


@dataclass(frozen=True)
class ErrorDiagnosis:
    kind: str
    system_message: str | None = None
    subcategory: str | None = None
    comment: str = ""
    provenance: str = RULES

    def __post_init__(self):
        if self.kind not in (SYSTEM_ERROR, RESULT_ERROR):
            raise ValueError(f"unknown diagnosis kind {self.kind!r}")
        if (self.kind == RESULT_ERROR) != (self.subcategory is not None):
            raise ValueError("subcategory present iff result error")
        if self.subcategory is not None and self.subcategory not in SUBCATEGORIES:
            raise ValueError(f"unknown subcategory {self.subcategory!r}")


def comment_for(subcategory: str) -> str:
    """Canonical annotation text for one result-error subcategory."""
    try:
        return _COMMENTS[subcategory]
    except KeyError:
        raise ValueError(f"unknown subcategory {subcategory!r}") from None


def display_name(subcategory: str) -> str:
    try:
        return _DISPLAY[subcategory]
    except KeyError:
        raise ValueError(f"unknown subcategory {subcategory!r}") from None


def parse_llm_verdict(completion: str) -> str:
    """Read a binary classification answer; the last category named wins."""
    lowered = completion.lower()
    condition_at = lowered.rfind("condition filter")
    processing_at = lowered.rfind("data processing")
    if condition_at < 0 and processing_at < 0:
        raise ExtractionError("completion names neither error category")
    return CONDITION_FILTER if condition_at > processing_at else DATA_PROCESSING


def _result_diagnosis(subcategory: str, provenance: str) -> ErrorDiagnosis:
    return ErrorDiagnosis(
        kind=RESULT_ERROR,
        subcategory=subcategory,
        comment=comment_for(subcategory),
        provenance=provenance,
    )


_TABLE_RULE = {
    sqlanalysis.PREDICTED_SUPERSET: EXCESSIVE_TABLES,
    sqlanalysis.PREDICTED_SUBSET: MISSING_TABLES,
    sqlanalysis.INCOMPARABLE: INCORRECT_TABLES,
}

_COLUMN_RULE = {
    sqlanalysis.PREDICTED_SUPERSET: EXCESSIVE_COLUMNS,
    sqlanalysis.PREDICTED_SUBSET: MISSING_COLUMNS,
    sqlanalysis.INCOMPARABLE: INCORRECT_COLUMNS,
}


def classify(
    pred_sql: str,
    gold_sql: str,
    pred_outcome: ExecutionOutcome,
    catalog=None,
    llm: Callable[[str], str] | None = None,
    question: str = "",
) -> ErrorDiagnosis:
    """Diagnose a known-wrong prediction.

    The caller must already have established the pair disagrees. Failed
    executions carry the engine message verbatim. Result errors walk the
    priority ladder: table sets, column sets (only once tables agree), join
    pairs, then the LLM binary decision between condition filtering and
    data processing. Without an llm callable the final step falls back to
    condition_filter, marked unverified.
    """
    if pred_outcome.status != OK:
        message = pred_outcome.error_message or "query execution exceeded the time budget"
        return ErrorDiagnosis(kind=SYSTEM_ERROR, system_message=message)
    if pred_sql.strip().rstrip(";").strip() == gold_sql.strip().rstrip(";").strip():
        raise ValueError("prediction is identical to gold; nothing to classify")
    gold_refs = sqlanalysis.extract_entities(gold_sql, catalog)
    try:
        pred_refs = sqlanalysis.extract_entities(pred_sql, catalog)
    except Exception:
        # executed fine but outside the parsed subset: treat the table set
        # as incomparable rather than guessing deeper structure
        return _result_diagnosis(INCORRECT_TABLES, PARSE_DEGRADED)
    diff = sqlanalysis.diff_structure(pred_refs, gold_refs)
    if diff.table_relation != sqlanalysis.EQUAL:
        return _result_diagnosis(_TABLE_RULE[diff.table_relation], RULES)
    if diff.column_relation != sqlanalysis.EQUAL:
        return _result_diagnosis(_COLUMN_RULE[diff.column_relation], RULES)
    if not diff.join_equal:
        return _result_diagnosis(JOIN_COLUMNS, RULES)
    if llm is None:
        return _result_diagnosis(CONDITION_FILTER, FALLBACK_UNVERIFIED)
    from .prompts import render_error_classification

    prompt = render_error_classification(question, gold_sql, pred_sql)
    try:
        verdict = parse_llm_verdict(llm(prompt.text))
    except ExtractionError:
        return _result_diagnosis(CONDITION_FILTER, FALLBACK_UNVERIFIED)
    return _result_diagnosis(verdict, LLM)
