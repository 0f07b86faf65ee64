"""Benchmark harness for LLM SQL skills: generation, debugging,
optimization, description and schema linking over SQLite databases."""

from .classifier import ErrorDiagnosis, classify
from .dataset import (
    BenchmarkInstance,
    DatabaseCatalog,
    DatabaseRegistry,
    TableSchema,
    compose_question,
    introspect_catalog,
    load_instances,
    stratify,
)
from .errors import (
    ConfigError,
    DataError,
    EndpointError,
    ExtractionError,
    SqlBenchError,
    SqlParseError,
    TimingError,
    TransportError,
    WriteStatementError,
)
from .executor import (
    ExecutionOutcome,
    TimingProfile,
    TimingProtocol,
    efficiency_ratio,
    execute,
    results_match,
    time_query,
)
from .llmclient import (
    CompletionRecord,
    LlmClient,
    ModelEndpointConfig,
    extract_bool,
    extract_question,
    extract_sql,
)
from .metrics import (
    RetrievalResult,
    ScoredInstance,
    consistency_rate,
    cves,
    ex,
    exact_match,
    res,
    rouge_f1,
    subset_match,
    ves,
)
from .pipeline import (
    RunConfig,
    RunRecord,
    run_general_debug,
    run_optimization,
    run_schema_linking,
    run_self_debug,
    run_sql2text,
    run_text2sql,
)
from .prompts import (
    PRESET_TEMPLATES,
    RenderedPrompt,
    TemplateSpec,
    render_consistency,
    render_debug,
    render_error_classification,
    render_linking,
    render_optimization,
    render_schema,
    render_sql2text,
    render_text2sql,
)
from .report import score_and_report
from .sqlanalysis import EntityRefs, diff_structure, extract_entities, strip_to_tables
from .sqlast import has_top_level_order_by, parse_sql, statement_kind

__version__ = "0.1.0"

__all__ = [
    "BenchmarkInstance",
    "CompletionRecord",
    "ConfigError",
    "DataError",
    "DatabaseCatalog",
    "DatabaseRegistry",
    "EndpointError",
    "EntityRefs",
    "ErrorDiagnosis",
    "ExecutionOutcome",
    "ExtractionError",
    "LlmClient",
    "ModelEndpointConfig",
    "PRESET_TEMPLATES",
    "RenderedPrompt",
    "RetrievalResult",
    "RunConfig",
    "RunRecord",
    "ScoredInstance",
    "SqlBenchError",
    "SqlParseError",
    "TableSchema",
    "TemplateSpec",
    "TimingError",
    "TimingProfile",
    "TimingProtocol",
    "TransportError",
    "WriteStatementError",
    "classify",
    "compose_question",
    "consistency_rate",
    "cves",
    "diff_structure",
    "efficiency_ratio",
    "ex",
    "exact_match",
    "execute",
    "extract_bool",
    "extract_entities",
    "extract_question",
    "extract_sql",
    "has_top_level_order_by",
    "introspect_catalog",
    "load_instances",
    "parse_sql",
    "res",
    "results_match",
    "rouge_f1",
    "run_general_debug",
    "run_optimization",
    "run_schema_linking",
    "run_self_debug",
    "run_sql2text",
    "run_text2sql",
    "render_consistency",
    "render_debug",
    "render_error_classification",
    "render_linking",
    "render_optimization",
    "render_schema",
    "render_sql2text",
    "render_text2sql",
    "score_and_report",
    "statement_kind",
    "stratify",
    "strip_to_tables",
    "subset_match",
    "time_query",
    "ves",
]
