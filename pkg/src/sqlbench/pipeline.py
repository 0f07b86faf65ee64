"""Task runners that drive prompt rendering, completion, execution and
scoring end to end, producing persistable run records."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import classifier, metrics
from .classifier import ErrorDiagnosis
from .dataset import BenchmarkInstance, DatabaseRegistry, compose_question
from .errors import (
    ConfigError,
    DataError,
    EndpointError,
    ExtractionError,
    SqlBenchError,
    TimingError,
    TransportError,
    WriteStatementError,
)
from .executor import (
    DEFAULT_TIMEOUT,
    ENGINE_ERROR,
    OK,
    ExecutionOutcome,
    TimingProtocol,
    efficiency_ratio,
    execute,
    results_match,
    time_query,
)
from .llmclient import (
    LlmClient,
    ModelEndpointConfig,
    extract_bool,
    extract_question,
    extract_sql,
)
from .metrics import RetrievalResult, ScoredInstance
from .prompts import (
    CHAT,
    DEBUG_STRATEGIES,
    DEBUG_STRATEGY_LABELS,
    DEFAULT_TEMPLATE,
    FEW_SHOT,
    MD,
    OPTIMIZATION_VARIANTS,
    OPTIMIZATION_VARIANT_LABELS,
    REGENERATE,
    SIMPLE_DDL,
    WRONG_SQL,
    WRONG_SQL_ALL,
    WRONG_SQL_ALL_COMMENT,
    WRONG_SQL_SYSTEM,
    Y_SCHEMA_Q,
    ZERO_SHOT,
    TemplateSpec,
    render_consistency,
    render_debug,
    render_linking,
    render_optimization,
    render_sql2text,
    render_text2sql,
)
from .sqlanalysis import extract_entities, strip_to_tables

log = logging.getLogger(__name__)

TEXT2SQL = "text2sql"
SELF_DEBUG = "self_debug"
GENERAL_DEBUG = "general_debug"
OPTIMIZATION = "optimization"
SQL_TO_TEXT = "sql_to_text"
SCHEMA_LINKING = "schema_linking"

TASKS = (TEXT2SQL, SELF_DEBUG, GENERAL_DEBUG, OPTIMIZATION, SQL_TO_TEXT, SCHEMA_LINKING)

TWO_STAGE = "two_stage"
DIRECT = "direct"
OPTIMIZATION_MODES = (TWO_STAGE, DIRECT)

PRESQL = "presql"
FEW_SHOT_PLUS_PRESQL = "few_shot_plus_presql"
LINKING_METHODS = (ZERO_SHOT, FEW_SHOT, PRESQL, FEW_SHOT_PLUS_PRESQL)

LINKING_METHOD_LABELS = {
    ZERO_SHOT: "Zero-shot",
    FEW_SHOT: "Few-shot",
    PRESQL: "PreSQL",
    FEW_SHOT_PLUS_PRESQL: "Few-shot + PreSQL",
}

ALL_METHODS = "all"

_NO_SQL_MESSAGE = "no SQL statement could be extracted from the completion"


@dataclass(frozen=True)
class RunConfig:
    task: str
    model: ModelEndpointConfig | None = None
    template: str = DEFAULT_TEMPLATE
    debugger_model: ModelEndpointConfig | None = None
    evaluator_model: ModelEndpointConfig | None = None
    rounds: int = 1
    strategy: str = WRONG_SQL_ALL_COMMENT
    mode: str = TWO_STAGE
    variant: str = Y_SCHEMA_Q
    method: str = ALL_METHODS
    with_fk: bool = False
    parallelism: int = 1
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        TemplateSpec.from_name(self.template)
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.strategy not in DEBUG_STRATEGIES:
            raise ConfigError(f"unknown debug strategy {self.strategy!r}")
        if self.mode not in OPTIMIZATION_MODES:
            raise ConfigError(f"unknown optimization mode {self.mode!r}")
        if self.variant not in OPTIMIZATION_VARIANTS:
            raise ConfigError(f"unknown optimization variant {self.variant!r}")
        if self.method not in LINKING_METHODS + (ALL_METHODS,):
            raise ConfigError(f"unknown linking method {self.method!r}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.task == GENERAL_DEBUG and self.debugger_model is None:
            raise ConfigError("general_debug requires a debugger_model")

    def snapshot(self) -> dict:
        data = dataclasses.asdict(self)
        return data


@dataclass
class RunRecord:
    """A persisted run: header, per-instance entries, aggregate metrics.

    Serialized as JSONL with one line per entry so partially-written runs
    stay readable. Completions are referenced by cache digest, never inlined.
    """

    run_id: str
    config: dict
    entries: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)

    @classmethod
    def new(cls, config: RunConfig) -> "RunRecord":
        return cls(run_id=uuid.uuid4().hex[:12], config=config.snapshot())

    def append(self, entry: dict) -> None:
        self.entries.append(entry)

    def instance_entries(self) -> list:
        return [e for e in self.entries if e.get("kind") == "instance"]

    @property
    def task(self) -> str:
        return self.config.get("task", "")

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [
            json.dumps(
                {"kind": "run_header", "run_id": self.run_id, "config": self.config},
                ensure_ascii=False,
            )
        ]
        lines.extend(json.dumps(e, ensure_ascii=False) for e in self.entries)
        lines.append(json.dumps({"kind": "aggregates", "data": self.aggregates}, ensure_ascii=False))
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
        tmp.replace(path)
        return path

    @classmethod
    def load(cls, path: str | Path) -> "RunRecord":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read run record {path}: {exc}") from exc
        run_id, config, entries, aggregates = "", {}, [], {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed record line: {exc}") from exc
            kind = obj.get("kind")
            if kind == "run_header":
                run_id = obj.get("run_id", "")
                config = obj.get("config", {})
            elif kind == "aggregates":
                aggregates = obj.get("data", {})
            else:
                entries.append(obj)
        if not run_id:
            raise DataError(f"{path}: missing run_header line")
        return cls(run_id=run_id, config=config, entries=entries, aggregates=aggregates)


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _map_instances(items, worker, parallelism: int) -> list:
    """Apply worker to every item, preserving input order in the output."""
    if parallelism <= 1 or len(items) <= 1:
        return [worker(item) for item in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(worker, items))


def _safe_execute(db_path: str, sql: str, timeout: float) -> ExecutionOutcome:
    try:
        return execute(db_path, sql, timeout=timeout)
    except WriteStatementError as exc:
        return ExecutionOutcome(status=ENGINE_ERROR, error_message=str(exc))


def _spec_from_config(config: RunConfig) -> TemplateSpec:
    spec = TemplateSpec.from_name(config.template)
    if config.with_fk and not spec.include_foreign_keys:
        spec = dataclasses.replace(spec, include_foreign_keys=True)
    return spec


def _resolve_db(registry: DatabaseRegistry, db_id: str):
    catalog = registry.catalog(db_id)
    return catalog, str(registry.resolve_db_path(db_id))


def _generate_entry(
    instance: BenchmarkInstance,
    registry: DatabaseRegistry,
    spec: TemplateSpec,
    config: RunConfig,
    client: LlmClient,
    task: str = TEXT2SQL,
) -> dict:
    """One render -> complete -> extract -> execute -> compare step."""
    entry = {
        "kind": "instance",
        "task": task,
        "instance_id": str(instance.id),
        "db_id": instance.db_id,
        "stratum": instance.stratum,
        "correct": False,
    }
    try:
        catalog, db_path = _resolve_db(registry, instance.db_id)
    except (DataError, SqlBenchError) as exc:
        entry["error"] = f"data: {exc}"
        return entry
    question = compose_question(instance.question, instance.evidence)
    prompt = render_text2sql(catalog, question, spec)
    entry["prompt_digest"] = _digest(prompt.text)
    try:
        completion = client.complete(prompt)
    except (TransportError, EndpointError) as exc:
        entry["error"] = f"endpoint: {exc}"
        return entry
    entry["completion_digest"] = completion.cache_key
    try:
        sql = extract_sql(completion.completion, prompt.expected_answer_mode)
    except ExtractionError as exc:
        entry["extract_error"] = str(exc)
        return entry
    entry["predicted_sql"] = sql
    outcome = _safe_execute(db_path, sql, config.timeout)
    entry["status"] = outcome.status
    if outcome.error_message:
        entry["error_message"] = outcome.error_message
    gold = _safe_execute(db_path, instance.gold_sql, config.timeout)
    if gold.status != OK:
        entry["gold_error"] = gold.error_message or gold.status
        return entry
    entry["correct"] = outcome.status == OK and results_match(outcome, gold, instance.gold_sql)
    return entry


def _endpoint_health(entries: list) -> tuple[int, int]:
    """(successful completions, endpoint failures) over instance entries."""
    completed = sum(1 for e in entries if "completion_digest" in e)
    failed = sum(1 for e in entries if str(e.get("error", "")).startswith("endpoint:"))
    return completed, failed


def _scored_from_entries(entries: list) -> list[ScoredInstance]:
    scored = []
    for e in entries:
        r = e.get("r_efficiency") if e.get("correct") else None
        scored.append(
            ScoredInstance(e["instance_id"], 1 if e.get("correct") else 0, r_efficiency=r)
        )
    return scored


def _stratum_breakdown(entries: list) -> dict:
    strata = {}
    for label in ("1", "2", "3", ">3"):
        bucket = [e for e in entries if e.get("stratum") == label]
        strata[label] = {
            "n": len(bucket),
            "ex": metrics.ex(_scored_from_entries(bucket)) if bucket else None,
        }
    return strata


# ---------------------------------------------------------------------------
# Text-to-SQL
# ---------------------------------------------------------------------------


def run_text2sql(
    instances: list[BenchmarkInstance],
    registry: DatabaseRegistry,
    config: RunConfig,
    client: LlmClient,
) -> RunRecord:
    record = RunRecord.new(config)
    spec = _spec_from_config(config)

    def worker(instance):
        return _generate_entry(instance, registry, spec, config, client, task=TEXT2SQL)

    entries = _map_instances(instances, worker, config.parallelism)
    for entry in entries:
        record.append(entry)
    completed, failed = _endpoint_health(entries)
    record.aggregates = {
        "task": TEXT2SQL,
        "template": spec.name,
        "with_fk": config.with_fk,
        "n": len(entries),
        "ex": metrics.ex(_scored_from_entries(entries)) if entries else None,
        "strata": _stratum_breakdown(entries),
        "completed": completed,
        "endpoint_errors": failed,
    }
    return record


# ---------------------------------------------------------------------------
# Debugging
# ---------------------------------------------------------------------------


@dataclass
class _DebugState:
    instance: BenchmarkInstance
    sql: str | None
    outcome: ExecutionOutcome | None = None
    wrong_text: str | None = None  # text shown as the wrong query in prompts
    corrected_round: int | None = None
    rounds: list = field(default_factory=list)

    @property
    def pending(self) -> bool:
        return self.corrected_round is None


def _initial_states(
    prior: RunRecord,
    instances: list[BenchmarkInstance],
    client: LlmClient,
) -> tuple[list[_DebugState], list[dict], int, int]:
    by_id = {str(i.id): i for i in instances}
    prior_entries = prior.instance_entries()
    total = len(prior_entries)
    prior_correct = sum(1 for e in prior_entries if e.get("correct"))
    states, skipped = [], []
    for entry in prior_entries:
        if entry.get("correct"):
            continue
        iid = str(entry["instance_id"])
        instance = by_id.get(iid)
        if instance is None:
            skipped.append(
                {"kind": "skip", "instance_id": iid, "reason": "instance missing from dataset"}
            )
            continue
        sql = entry.get("predicted_sql")
        wrong_text = sql
        if wrong_text is None:
            cached = None
            digest = entry.get("completion_digest")
            if digest:
                cached = client.cached_completion(digest)
            wrong_text = cached.completion.strip() if cached else "(no SQL was produced)"
        states.append(_DebugState(instance=instance, sql=sql, wrong_text=wrong_text))
    return states, skipped, total, prior_correct


def _refresh_outcome(state: _DebugState, registry: DatabaseRegistry, config: RunConfig) -> None:
    if state.sql is None:
        state.outcome = ExecutionOutcome(status=ENGINE_ERROR, error_message=_NO_SQL_MESSAGE)
        return
    try:
        _, db_path = _resolve_db(registry, state.instance.db_id)
    except (DataError, SqlBenchError) as exc:
        state.outcome = ExecutionOutcome(status=ENGINE_ERROR, error_message=f"data: {exc}")
        return
    state.outcome = _safe_execute(db_path, state.sql, config.timeout)


def _diagnose(
    state: _DebugState,
    catalog,
    question: str,
    strategy: str,
    client: LlmClient,
) -> ErrorDiagnosis | None:
    if strategy in (REGENERATE, WRONG_SQL):
        return None
    outcome = state.outcome
    if outcome is None or outcome.status != OK:
        message = outcome.error_message if outcome else None
        return ErrorDiagnosis(
            kind=classifier.SYSTEM_ERROR, system_message=message or "execution failed"
        )
    llm = None
    if strategy in (WRONG_SQL_ALL, WRONG_SQL_ALL_COMMENT):
        llm = lambda text: client.complete(text).completion  # noqa: E731
    try:
        return classifier.classify(
            state.sql,
            state.instance.gold_sql,
            outcome,
            catalog,
            llm=llm,
            question=question,
        )
    except (SqlBenchError, ValueError) as exc:
        log.warning("classification failed for %s: %s", state.instance.id, exc)
        return ErrorDiagnosis(
            kind=classifier.RESULT_ERROR,
            subcategory=classifier.CONDITION_FILTER,
            comment=classifier.comment_for(classifier.CONDITION_FILTER),
            provenance=classifier.FALLBACK_UNVERIFIED,
        )


def _diagnosis_dict(diagnosis: ErrorDiagnosis | None) -> dict | None:
    if diagnosis is None:
        return None
    data = {"kind": diagnosis.kind, "provenance": diagnosis.provenance}
    if diagnosis.system_message:
        data["system_message"] = diagnosis.system_message
    if diagnosis.subcategory:
        data["subcategory"] = diagnosis.subcategory
    return data


def _debug_round(
    state: _DebugState,
    round_no: int,
    registry: DatabaseRegistry,
    config: RunConfig,
    client: LlmClient,
    spec: TemplateSpec,
) -> None:
    step = {"round": round_no}
    try:
        catalog, db_path = _resolve_db(registry, state.instance.db_id)
    except (DataError, SqlBenchError) as exc:
        step["error"] = f"data: {exc}"
        state.rounds.append(step)
        return
    question = compose_question(state.instance.question, state.instance.evidence)
    diagnosis = _diagnose(state, catalog, question, config.strategy, client)
    step["diagnosis"] = _diagnosis_dict(diagnosis)
    try:
        prompt = render_debug(
            catalog, question, state.wrong_text, config.strategy, diagnosis, spec
        )
    except (ValueError, ConfigError) as exc:
        step["error"] = f"render: {exc}"
        state.rounds.append(step)
        return
    step["prompt_digest"] = _digest(prompt.text)
    try:
        completion = client.complete(prompt)
    except (TransportError, EndpointError) as exc:
        step["error"] = f"endpoint: {exc}"
        state.rounds.append(step)
        return
    step["completion_digest"] = completion.cache_key
    try:
        new_sql = extract_sql(completion.completion, prompt.expected_answer_mode)
    except ExtractionError as exc:
        step["extract_error"] = str(exc)
        state.sql = None
        state.wrong_text = completion.completion.strip() or "(no SQL was produced)"
        state.outcome = ExecutionOutcome(status=ENGINE_ERROR, error_message=_NO_SQL_MESSAGE)
        step["correct"] = False
        state.rounds.append(step)
        return
    step["predicted_sql"] = new_sql
    outcome = _safe_execute(db_path, new_sql, config.timeout)
    step["status"] = outcome.status
    if outcome.error_message:
        step["error_message"] = outcome.error_message
    gold = _safe_execute(db_path, state.instance.gold_sql, config.timeout)
    correct = (
        gold.status == OK
        and outcome.status == OK
        and results_match(outcome, gold, state.instance.gold_sql)
    )
    step["correct"] = correct
    state.sql = new_sql
    state.wrong_text = new_sql
    state.outcome = outcome
    if correct:
        state.corrected_round = round_no
    state.rounds.append(step)


def _error_counts(states: list[_DebugState]) -> tuple[int, int]:
    """(system, result) error counts over still-wrong instances."""
    system = result = 0
    for state in states:
        if not state.pending:
            continue
        if state.outcome is not None and state.outcome.status == OK:
            result += 1
        else:
            system += 1
    return system, result


def _debug_run(
    prior: RunRecord,
    instances: list[BenchmarkInstance],
    registry: DatabaseRegistry,
    config: RunConfig,
    client: LlmClient,
    task: str,
) -> RunRecord:
    record = RunRecord.new(config)
    spec = _spec_from_config(config)
    states, skipped, total, prior_correct = _initial_states(prior, instances, client)
    for entry in skipped:
        record.append(entry)
    for state in states:
        _refresh_outcome(state, registry, config)

    def pct(correct: int) -> float | None:
        return correct / total * 100.0 if total else None

    trajectory = [pct(prior_correct)]
    system0, result0 = _error_counts(states)
    system_counts, result_counts = [system0], [result0]
    corrected = 0
    for round_no in range(1, config.rounds + 1):
        pending = [s for s in states if s.pending]
        if not pending:
            trajectory.append(pct(prior_correct + corrected))
            system_counts.append(system_counts[-1])
            result_counts.append(result_counts[-1])
            continue

        def worker(state):
            _debug_round(state, round_no, registry, config, client, spec)
            return state

        _map_instances(pending, worker, config.parallelism)
        corrected = sum(1 for s in states if not s.pending)
        trajectory.append(pct(prior_correct + corrected))
        system, result = _error_counts(states)
        system_counts.append(system)
        result_counts.append(result)

    for state in states:
        record.append(
            {
                "kind": "instance",
                "task": task,
                "instance_id": str(state.instance.id),
                "db_id": state.instance.db_id,
                "corrected_round": state.corrected_round,
                "correct": state.corrected_round is not None,
                "final_sql": state.sql,
                "rounds": state.rounds,
            }
        )
    record.aggregates = {
        "task": task,
        "strategy": config.strategy,
        "strategy_label": DEBUG_STRATEGY_LABELS[config.strategy],
        "rounds": config.rounds,
        "population": total,
        "initially_correct": prior_correct,
        "initially_wrong": len(states),
        "corrected": sum(1 for s in states if not s.pending),
        "ex_trajectory": trajectory,
        "system_error_counts": system_counts,
        "result_error_counts": result_counts,
        "final_ex": trajectory[-1],
        "ex_improvement": (
            trajectory[-1] - trajectory[0]
            if trajectory[0] is not None and trajectory[-1] is not None
            else None
        ),
    }
    return record


def run_self_debug(
    prior: RunRecord,
    instances: list[BenchmarkInstance],
    registry: DatabaseRegistry,
    config: RunConfig,
    client: LlmClient,
) -> RunRecord:
    """Let the generating model repair its own wrong queries over rounds."""
    return _debug_run(prior, instances, registry, config, client, SELF_DEBUG)


def run_general_debug(
    prior: RunRecord,
    instances: list[BenchmarkInstance],
    registry: DatabaseRegistry,
    config: RunConfig,
    debugger_client: LlmClient,
) -> RunRecord:
    """Repair one model's wrong queries with a different debugger model."""
    return _debug_run(prior, instances, registry, config, debugger_client, GENERAL_DEBUG)


# ---------------------------------------------------------------------------
# Optimization
# ---------------------------------------------------------------------------


def run_optimization(
    instances: list[BenchmarkInstance],
    registry: DatabaseRegistry,
    config: RunConfig,
    client: LlmClient,
    stage1: RunRecord | None = None,
    protocol: TimingProtocol | None = None,
    clock=None,
) -> RunRecord:
    record = RunRecord.new(config)
    protocol = protocol or TimingProtocol()
    by_id = {str(i.id): i for i in instances}

    if config.mode == DIRECT:
        spec = TemplateSpec(
            SIMPLE_DDL, MD, CHAT, include_foreign_keys=config.with_fk, efficiency_variant=True
        )

        def worker(instance):
            entry = _generate_entry(instance, registry, spec, config, client, task=OPTIMIZATION)
            entry["mode"] = DIRECT
            return entry

        entries = _map_instances(instances, worker, config.parallelism)
        stage1_ex = None
    else:
        if stage1 is None:
            stage1 = run_text2sql(instances, registry, config, client)
        stage1_by_id = {e["instance_id"]: e for e in stage1.instance_entries()}
        stage1_ex = stage1.aggregates.get("ex")

        def worker(instance):
            return _rewrite_entry(instance, registry, config, client, stage1_by_id)

        entries = _map_instances(instances, worker, config.parallelism)

    # timing phase; the executor serializes actual measurements globally
    for entry in entries:
        if not entry.get("correct"):
            continue
        instance = by_id[entry["instance_id"]]
        try:
            _, db_path = _resolve_db(registry, instance.db_id)
            pred_profile = time_query(
                db_path, entry["predicted_sql"], protocol, clock=clock, timeout=config.timeout
            )
            gold_profile = time_query(
                db_path, instance.gold_sql, protocol, clock=clock, timeout=config.timeout
            )
            entry["r_efficiency"] = efficiency_ratio(pred_profile, gold_profile)
        except (TimingError, DataError, SqlBenchError) as exc:
            entry["r_efficiency"] = 1.0
            entry["timing_failed"] = str(exc)

    for entry in entries:
        record.append(entry)
    scored = _scored_from_entries(entries)
    completed, failed = _endpoint_health(entries)
    record.aggregates = {
        "task": OPTIMIZATION,
        "mode": config.mode,
        "variant": config.variant if config.mode == TWO_STAGE else None,
        "variant_label": (
            OPTIMIZATION_VARIANT_LABELS[config.variant] if config.mode == TWO_STAGE else None
        ),
        "n": len(entries),
        "ex": metrics.ex(scored) if scored else None,
        "ves": metrics.ves(scored) if scored else None,
        "cves": metrics.cves(scored) if scored else None,
        "stage1_ex": stage1_ex,
        "completed": completed,
        "endpoint_errors": failed,
    }
    return record


def _rewrite_entry(
    instance: BenchmarkInstance,
    registry: DatabaseRegistry,
    config: RunConfig,
    client: LlmClient,
    stage1_by_id: dict,
) -> dict:
    entry = {
        "kind": "instance",
        "task": OPTIMIZATION,
        "mode": TWO_STAGE,
        "instance_id": str(instance.id),
        "db_id": instance.db_id,
        "stratum": instance.stratum,
        "correct": False,
    }
    stage1_entry = stage1_by_id.get(str(instance.id), {})
    stage1_sql = stage1_entry.get("predicted_sql")
    if not stage1_sql:
        entry["error"] = "no stage-1 SQL to rewrite"
        return entry
    entry["stage1_sql"] = stage1_sql
    entry["stage1_correct"] = bool(stage1_entry.get("correct"))
    try:
        catalog, db_path = _resolve_db(registry, instance.db_id)
    except (DataError, SqlBenchError) as exc:
        entry["error"] = f"data: {exc}"
        return entry
    question = compose_question(instance.question, instance.evidence)
    try:
        prompt = render_optimization(
            stage1_sql, catalog=catalog, question=question, variant=config.variant
        )
    except (ValueError, ConfigError) as exc:
        entry["error"] = f"render: {exc}"
        return entry
    entry["prompt_digest"] = _digest(prompt.text)
    try:
        completion = client.complete(prompt)
    except (TransportError, EndpointError) as exc:
        entry["error"] = f"endpoint: {exc}"
        return entry
    entry["completion_digest"] = completion.cache_key
    try:
        rewritten = extract_sql(completion.completion, prompt.expected_answer_mode)
    except ExtractionError as exc:
        entry["extract_error"] = str(exc)
        return entry
    entry["predicted_sql"] = rewritten
    outcome = _safe_execute(db_path, rewritten, config.timeout)
    entry["status"] = outcome.status
    if outcome.error_message:
        entry["error_message"] = outcome.error_message
    gold = _safe_execute(db_path, instance.gold_sql, config.timeout)
    if gold.status != OK:
        entry["gold_error"] = gold.error_message or gold.status
        return entry
    entry["correct"] = outcome.status == OK and results_match(outcome, gold, instance.gold_sql)
    return entry


# ---------------------------------------------------------------------------
# SQL-to-text
# ---------------------------------------------------------------------------


def run_sql2text(
    instances: list[BenchmarkInstance],
    registry: DatabaseRegistry,
    config: RunConfig,
    client: LlmClient,
    evaluator: LlmClient | None = None,
) -> RunRecord:
    record = RunRecord.new(config)

    def worker(instance):
        entry = {
            "kind": "instance",
            "task": SQL_TO_TEXT,
            "instance_id": str(instance.id),
            "db_id": instance.db_id,
            "rouge": (0.0, 0.0, 0.0),
        }
        prompt = render_sql2text(instance.gold_sql, instance.evidence or None)
        entry["prompt_digest"] = _digest(prompt.text)
        try:
            completion = client.complete(prompt)
        except (TransportError, EndpointError) as exc:
            entry["error"] = f"endpoint: {exc}"
            return entry
        entry["completion_digest"] = completion.cache_key
        try:
            predicted = extract_question(completion.completion)
        except ExtractionError as exc:
            entry["extract_error"] = str(exc)
            return entry
        entry["predicted_question"] = predicted
        entry["rouge"] = metrics.rouge_f1(predicted, instance.question)
        if evaluator is not None:
            entry["consistency"] = [
                _judge(evaluator, predicted, instance.question),
                _judge(evaluator, instance.question, predicted),
            ]
        return entry

    entries = _map_instances(instances, worker, config.parallelism)
    for entry in entries:
        record.append(entry)
    n = len(entries)
    rouges = [tuple(e["rouge"]) for e in entries]
    pairs = [tuple(e["consistency"]) for e in entries if "consistency" in e]
    completed, failed = _endpoint_health(entries)
    record.aggregates = {
        "task": SQL_TO_TEXT,
        "n": n,
        "rouge1": sum(r[0] for r in rouges) / n if n else None,
        "rouge2": sum(r[1] for r in rouges) / n if n else None,
        "rougeL": sum(r[2] for r in rouges) / n if n else None,
        "consistency_rate": metrics.consistency_rate(pairs) if pairs else None,
        "evaluated": len(pairs),
        "completed": completed,
        "endpoint_errors": failed,
    }
    return record


def _judge(evaluator: LlmClient, sentence1: str, sentence2: str) -> bool:
    prompt = render_consistency(sentence1, sentence2)
    try:
        verdict = evaluator.complete(prompt)
        return extract_bool(verdict.completion)
    except (TransportError, EndpointError, ExtractionError):
        return False


# ---------------------------------------------------------------------------
# Schema linking
# ---------------------------------------------------------------------------


def run_schema_linking(
    instances: list[BenchmarkInstance],
    registry: DatabaseRegistry,
    config: RunConfig,
    client: LlmClient,
    fk_settings: tuple[bool, ...] = (False, True),
) -> RunRecord:
    record = RunRecord.new(config)
    methods = LINKING_METHODS if config.method == ALL_METHODS else (config.method,)

    def worker(instance):
        entry = {
            "kind": "instance",
            "task": SCHEMA_LINKING,
            "instance_id": str(instance.id),
            "db_id": instance.db_id,
        }
        try:
            catalog, _ = _resolve_db(registry, instance.db_id)
        except (DataError, SqlBenchError) as exc:
            entry["error"] = f"data: {exc}"
            return entry
        try:
            gt = extract_entities(instance.gold_sql, catalog).tables
        except SqlBenchError as exc:
            entry["error"] = f"gold SQL unparseable: {exc}"
            return entry
        if not gt:
            entry["error"] = "gold SQL references no tables"
            return entry
        entry["gt_tables"] = sorted(gt)
        question = compose_question(instance.question, instance.evidence)
        retrieval = {}
        for fk in fk_settings:
            memo: dict = {}
            per_method = {}
            for method in methods:
                per_method[method] = sorted(
                    _retrieve(method, instance, catalog, question, fk, client, config, memo)
                )
            retrieval["fk" if fk else "no_fk"] = per_method
        entry["retrieval"] = retrieval
        return entry

    entries = _map_instances(instances, worker, config.parallelism)
    for entry in entries:
        record.append(entry)

    matrix = {}
    scored_entries = [e for e in entries if "gt_tables" in e]
    for method in methods:
        cells = {}
        for fk_key in ("no_fk", "fk"):
            results = [
                RetrievalResult(
                    frozenset(e["gt_tables"]),
                    frozenset(e["retrieval"].get(fk_key, {}).get(method, [])),
                )
                for e in scored_entries
                if fk_key in e.get("retrieval", {})
            ]
            if results:
                cells[fk_key] = {
                    "res": metrics.res(results),
                    "subset": metrics.subset_match(results),
                    "exact": metrics.exact_match(results),
                    "n": len(results),
                }
            else:
                cells[fk_key] = None
        matrix[method] = cells
    record.aggregates = {
        "task": SCHEMA_LINKING,
        "n": len(scored_entries),
        "methods": list(methods),
        "fk_settings": ["fk" if fk else "no_fk" for fk in fk_settings],
        "matrix": matrix,
    }
    return record


def _retrieve(
    method: str,
    instance: BenchmarkInstance,
    catalog,
    question: str,
    fk: bool,
    client: LlmClient,
    config: RunConfig,
    memo: dict,
) -> frozenset:
    if method in memo:
        return memo[method]
    if method in (ZERO_SHOT, FEW_SHOT):
        prompt = render_linking(catalog, question, method, with_fk=fk)
        try:
            completion = client.complete(prompt)
            tables = strip_to_tables(completion.completion, catalog)
        except (TransportError, EndpointError, ExtractionError):
            tables = []
        result = frozenset(t.lower() for t in tables)
    elif method == PRESQL:
        spec = TemplateSpec(SIMPLE_DDL, MD, CHAT, include_foreign_keys=fk)
        prompt = render_text2sql(catalog, question, spec)
        try:
            completion = client.complete(prompt)
            sql = extract_sql(completion.completion, prompt.expected_answer_mode)
            result = extract_entities(sql, catalog).tables
        except (TransportError, EndpointError, SqlBenchError):
            result = frozenset()
    elif method == FEW_SHOT_PLUS_PRESQL:
        few = _retrieve(FEW_SHOT, instance, catalog, question, fk, client, config, memo)
        pre = _retrieve(PRESQL, instance, catalog, question, fk, client, config, memo)
        result = few | pre
    else:
        raise ConfigError(f"unknown linking method {method!r}")
    memo[method] = result
    return result
