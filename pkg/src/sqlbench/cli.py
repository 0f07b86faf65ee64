"""Command-line front end: validate data, run tasks, rescore, report,
render single prompts and classify single predictions."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import report as report_mod
from .classifier import classify
from .config import AppConfig, load_config
from .dataset import BIRD_JSON, SPIDER_JSON, DatabaseRegistry, compose_question, load_instances
from .errors import (
    ConfigError,
    DataError,
    EndpointError,
    SqlBenchError,
    TransportError,
)
from .executor import ENGINE_ERROR, ExecutionOutcome, execute
from .llmclient import LlmClient, ModelEndpointConfig
from .pipeline import (
    GENERAL_DEBUG,
    OPTIMIZATION,
    RunRecord,
    SCHEMA_LINKING,
    SELF_DEBUG,
    SQL_TO_TEXT,
    TEXT2SQL,
    run_general_debug,
    run_optimization,
    run_schema_linking,
    run_self_debug,
    run_sql2text,
    run_text2sql,
)
from .prompts import TemplateSpec, render_text2sql
from .sqlanalysis import extract_entities

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ENDPOINT = 4
EXIT_INTERNAL = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqlbench",
        description="Benchmark LLM SQL skills: generation, debugging, "
        "optimization, description and schema linking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate-data", help="check dataset and database invariants")
    validate.add_argument("--config", help="YAML config file")
    validate.add_argument("--data", help="instance file (overrides config)")
    validate.add_argument("--db-root", help="database directory (overrides config)")
    validate.add_argument(
        "--format", choices=[BIRD_JSON, SPIDER_JSON], default=None, help="instance file format"
    )

    run = sub.add_parser("run", help="execute a configured evaluation run")
    run.add_argument("--config", required=True, help="YAML config file")
    run.add_argument("--output", help="run record path (overrides config)")
    run.add_argument("overrides", nargs="*", help="key=value config overrides")

    rescore = sub.add_parser(
        "rescore", help="recompute metrics from cached completions, no network"
    )
    rescore.add_argument("--config", required=True, help="YAML config file")
    rescore.add_argument("--output", help="run record path (overrides config)")
    rescore.add_argument("overrides", nargs="*", help="key=value config overrides")

    rep = sub.add_parser("report", help="render a report from run records")
    rep.add_argument("--record", required=True, nargs="+", help="run record JSONL file(s)")
    rep.add_argument(
        "--format",
        choices=list(report_mod.REPORT_FORMATS),
        default=report_mod.MARKDOWN,
        help="report format",
    )

    render = sub.add_parser("render-prompt", help="print one rendered prompt")
    render.add_argument("--template", required=True, help="template name, e.g. SimpleDDL-MD-Chat")
    render.add_argument("--db", required=True, help="database id")
    render.add_argument("--question", required=True, help="natural-language question")
    render.add_argument("--evidence", default="", help="extra evidence appended to the question")
    render.add_argument("--fk", action="store_true", help="include foreign keys in the schema")
    render.add_argument("--db-root", help="database directory")
    render.add_argument("--config", help="YAML config file supplying db_root")

    cls = sub.add_parser("classify", help="diagnose one wrong prediction")
    cls.add_argument("--db", required=True, help="database id")
    cls.add_argument("--gold", required=True, help="gold SQL query")
    cls.add_argument("--pred", required=True, help="predicted SQL query")
    cls.add_argument("--question", default="", help="question text, used by LLM-tier prompts")
    cls.add_argument("--db-root", help="database directory")
    cls.add_argument("--config", help="YAML config file supplying db_root")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except DataError as exc:
        return _fail(EXIT_DATA, "data", exc)
    except (TransportError, EndpointError) as exc:
        return _fail(EXIT_ENDPOINT, "endpoint", exc)
    except SqlBenchError as exc:
        return _fail(EXIT_INTERNAL, "internal", exc)
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not crashes
        return _fail(EXIT_INTERNAL, "internal", exc)


def _fail(code: int, kind: str, exc: Exception) -> int:
    message = str(exc).replace("\n", " ").strip() or exc.__class__.__name__
    print(f"error [{kind}]: {message}", file=sys.stderr)
    return code


def _dispatch(args) -> int:
    if args.command == "validate-data":
        return _cmd_validate(args)
    if args.command == "run":
        return _cmd_run(args, offline=False)
    if args.command == "rescore":
        return _cmd_run(args, offline=True)
    if args.command == "report":
        return _cmd_report(args)
    if args.command == "render-prompt":
        return _cmd_render(args)
    if args.command == "classify":
        return _cmd_classify(args)
    raise ConfigError(f"unknown command {args.command!r}")


def _db_root_from(args) -> Path:
    if getattr(args, "db_root", None):
        return Path(args.db_root)
    if getattr(args, "config", None):
        app = load_config(args.config)
        if app.db_root:
            return app.db_root
    raise ConfigError("no database root: pass --db-root or a config with db_root")


def _cmd_validate(args) -> int:
    if args.config:
        app = load_config(args.config)
        data_path = Path(args.data) if args.data else app.data_path
        db_root = Path(args.db_root) if args.db_root else app.db_root
        data_format = args.format or app.data_format
    else:
        data_path = Path(args.data) if args.data else None
        db_root = Path(args.db_root) if args.db_root else None
        data_format = args.format or BIRD_JSON
    if data_path is None or db_root is None:
        raise ConfigError("validate-data needs --data and --db-root (or a config providing them)")

    instances = load_instances(data_path, data_format, drop_unparseable=False)
    if not instances:
        raise DataError(f"{data_path}: no instances")
    registry = DatabaseRegistry(db_root)
    db_ids = sorted({i.db_id for i in instances})
    tables = 0
    for db_id in db_ids:
        catalog = registry.catalog(db_id)
        if not catalog.table_names():
            raise DataError(f"database {db_id} has no tables")
        tables += len(catalog.table_names())
    unknown = 0
    for instance in instances:
        catalog = registry.catalog(instance.db_id)
        refs = extract_entities(instance.gold_sql, catalog)
        for table in refs.tables:
            if not catalog.has_table(table):
                unknown += 1
                print(
                    f"warning: instance {instance.id} references unknown table {table!r}",
                    file=sys.stderr,
                )
    print(
        f"ok: {len(instances)} instances across {len(db_ids)} databases "
        f"({tables} tables, {unknown} unknown table references)"
    )
    return EXIT_OK


def _make_client(
    endpoint: ModelEndpointConfig | None, app: AppConfig, offline: bool, what: str
) -> LlmClient:
    if endpoint is None:
        raise ConfigError(f"config is missing the {what} endpoint")
    return LlmClient(endpoint, cache_dir=app.cache_dir, offline=offline)


def _cmd_run(args, offline: bool) -> int:
    app = load_config(args.config, args.overrides)
    if app.data_path is None or app.db_root is None:
        raise ConfigError("config must provide data and db_root")
    instances = load_instances(app.data_path, app.data_format)
    if not instances:
        raise DataError(f"{app.data_path}: no usable instances")
    registry = DatabaseRegistry(app.db_root)
    cfg = app.run
    client = _make_client(cfg.model, app, offline, "model")
    task = cfg.task

    if task == TEXT2SQL:
        record = run_text2sql(instances, registry, cfg, client)
    elif task == SELF_DEBUG:
        record = run_self_debug(_prior(app), instances, registry, cfg, client)
    elif task == GENERAL_DEBUG:
        debugger = _make_client(cfg.debugger_model, app, offline, "debugger_model")
        record = run_general_debug(_prior(app), instances, registry, cfg, debugger)
    elif task == OPTIMIZATION:
        record = run_optimization(instances, registry, cfg, client)
    elif task == SQL_TO_TEXT:
        evaluator = (
            _make_client(cfg.evaluator_model, app, offline, "evaluator_model")
            if cfg.evaluator_model
            else None
        )
        record = run_sql2text(instances, registry, cfg, client, evaluator)
    elif task == SCHEMA_LINKING:
        record = run_schema_linking(instances, registry, cfg, client)
    else:
        raise ConfigError(f"unknown task {task!r}")

    completed = record.aggregates.get("completed")
    failures = record.aggregates.get("endpoint_errors")
    if completed == 0 and failures:
        raise TransportError(f"all {failures} completion requests failed; record not written")

    output = Path(args.output) if args.output else app.output_path
    if output:
        record.save(output)
        print(f"record: {output}", file=sys.stderr)
    print(report_mod.score_and_report(record, report_mod.MARKDOWN))
    return EXIT_OK


def _prior(app: AppConfig) -> RunRecord:
    if app.prior_record is None:
        raise ConfigError("debug tasks need prior_record in the config")
    return RunRecord.load(app.prior_record)


def _cmd_report(args) -> int:
    records = [RunRecord.load(p) for p in args.record]
    print(report_mod.score_and_report(records, args.format))
    return EXIT_OK


def _cmd_render(args) -> int:
    registry = DatabaseRegistry(_db_root_from(args))
    catalog = registry.catalog(args.db)
    spec = TemplateSpec.from_name(args.template)
    if args.fk and not spec.include_foreign_keys:
        import dataclasses

        spec = dataclasses.replace(spec, include_foreign_keys=True)
    question = compose_question(args.question, args.evidence)
    prompt = render_text2sql(catalog, question, spec)
    print(prompt.text)
    return EXIT_OK


def _cmd_classify(args) -> int:
    registry = DatabaseRegistry(_db_root_from(args))
    catalog = registry.catalog(args.db)
    db_path = registry.resolve_db_path(args.db)
    try:
        outcome = execute(db_path, args.pred)
    except SqlBenchError as exc:
        outcome = ExecutionOutcome(status=ENGINE_ERROR, error_message=str(exc))
    diagnosis = classify(args.pred, args.gold, outcome, catalog, llm=None, question=args.question)
    payload = {
        "kind": diagnosis.kind,
        "subcategory": diagnosis.subcategory,
        "comment": diagnosis.comment,
        "system_message": diagnosis.system_message,
        "provenance": diagnosis.provenance,
    }
    print(json.dumps(payload, ensure_ascii=False))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
