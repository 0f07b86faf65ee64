"""End-to-end task runners driven by a scripted endpoint: generation,
debugging rounds, optimization, SQL-to-text and schema linking."""

import itertools

import pytest

from sqlbench.dataset import BenchmarkInstance
from sqlbench.errors import ConfigError
from sqlbench.llmclient import ModelEndpointConfig
from sqlbench.pipeline import (
    DIRECT,
    GENERAL_DEBUG,
    OPTIMIZATION,
    SCHEMA_LINKING,
    SELF_DEBUG,
    SQL_TO_TEXT,
    TEXT2SQL,
    RunConfig,
    RunRecord,
    run_general_debug,
    run_optimization,
    run_schema_linking,
    run_self_debug,
    run_sql2text,
    run_text2sql,
)
from sqlbench.prompts import REGENERATE, WRONG_SQL_ALL_COMMENT
from sqlbench.sqlanalysis import extract_entities

from conftest import ScriptedEndpoint, make_client, oracle_endpoint


class SteppingClock:
    """Monotonic fake perf counter: every reading advances by a fixed step."""

    def __init__(self, step=1.0):
        self._ticks = itertools.count(step=step)

    def __call__(self):
        return next(self._ticks)


def _stub_endpoint_config():
    return ModelEndpointConfig(base_url="http://stub.invalid/v1", model_name="stub-model")


class TestRunConfig:
    def test_defaults_valid(self):
        config = RunConfig(task=TEXT2SQL)
        assert config.template == "SimpleDDL-MD-Chat"
        assert config.rounds == 1

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(task="sorcery"),
            dict(task=TEXT2SQL, template="No-Such-Template"),
            dict(task=SELF_DEBUG, rounds=0),
            dict(task=SELF_DEBUG, strategy="hope"),
            dict(task=OPTIMIZATION, mode="triple"),
            dict(task=OPTIMIZATION, variant="quantum"),
            dict(task=SCHEMA_LINKING, method="dowsing"),
            dict(task=TEXT2SQL, parallelism=0),
            dict(task=TEXT2SQL, timeout=0),
            dict(task=GENERAL_DEBUG),
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            RunConfig(**kwargs)

    def test_general_debug_with_debugger_ok(self):
        RunConfig(task=GENERAL_DEBUG, debugger_model=_stub_endpoint_config())


class TestRunRecord:
    def test_save_load_roundtrip(self, tmp_path):
        record = RunRecord.new(RunConfig(task=TEXT2SQL))
        record.append({"kind": "instance", "instance_id": "7", "correct": True})
        record.append({"kind": "skip", "instance_id": "9", "reason": "missing"})
        record.aggregates = {"task": TEXT2SQL, "ex": 100.0}
        path = record.save(tmp_path / "runs" / "r.jsonl")
        loaded = RunRecord.load(path)
        assert loaded.run_id == record.run_id
        assert loaded.config == record.config
        assert loaded.entries == record.entries
        assert loaded.aggregates == record.aggregates
        assert loaded.task == TEXT2SQL

    def test_instance_entries_filter(self):
        record = RunRecord.new(RunConfig(task=TEXT2SQL))
        record.append({"kind": "instance", "instance_id": "1"})
        record.append({"kind": "skip", "instance_id": "2"})
        assert [e["instance_id"] for e in record.instance_entries()] == ["1"]

    def test_load_requires_header(self, tmp_path):
        path = tmp_path / "r.jsonl"
        path.write_text('{"kind": "instance"}\n')
        from sqlbench.errors import DataError

        with pytest.raises(DataError):
            RunRecord.load(path)


class TestText2Sql:
    def test_oracle_scores_full_marks(self, t2s_instances, registry):
        endpoint = oracle_endpoint(t2s_instances)
        with make_client(endpoint) as client:
            record = run_text2sql(t2s_instances, registry, RunConfig(task=TEXT2SQL), client)
        agg = record.aggregates
        assert agg["ex"] == 100.0
        assert agg["n"] == 6
        assert agg["completed"] == 6
        assert agg["endpoint_errors"] == 0
        assert agg["strata"]["1"] == {"n": 3, "ex": 100.0}
        assert agg["strata"]["2"] == {"n": 1, "ex": 100.0}
        assert agg["strata"]["3"] == {"n": 1, "ex": 100.0}
        assert agg["strata"][">3"] == {"n": 1, "ex": 100.0}
        for entry in record.instance_entries():
            assert entry["correct"] is True
            assert entry["status"] == "ok"
            assert len(entry["prompt_digest"]) == 64
            assert len(entry["completion_digest"]) == 64

    def test_trivial_stub_scores_zero(self, t2s_instances, registry):
        endpoint = ScriptedEndpoint(default="SELECT 1")
        with make_client(endpoint) as client:
            record = run_text2sql(t2s_instances, registry, RunConfig(task=TEXT2SQL), client)
        assert record.aggregates["ex"] == 0.0
        assert all(e["predicted_sql"] == "SELECT 1" for e in record.instance_entries())

    def test_endpoint_failure_counted(self, t2s_instances, registry):
        import httpx

        def handler(request):
            return httpx.Response(500, text="down")

        config = ModelEndpointConfig(
            base_url="http://stub.invalid/v1", model_name="stub-model", max_retries=0
        )
        from sqlbench.llmclient import LlmClient

        with LlmClient(config, transport=httpx.MockTransport(handler), sleeper=lambda s: None) as client:
            record = run_text2sql(t2s_instances, registry, RunConfig(task=TEXT2SQL), client)
        agg = record.aggregates
        assert agg["completed"] == 0
        assert agg["endpoint_errors"] == 6
        assert agg["ex"] == 0.0
        assert all(e["error"].startswith("endpoint:") for e in record.instance_entries())

    def test_unknown_db_reported_per_instance(self, registry):
        bad = BenchmarkInstance(id="x", db_id="atlantis", question="q?", gold_sql="SELECT 1")
        with make_client(ScriptedEndpoint()) as client:
            record = run_text2sql([bad], registry, RunConfig(task=TEXT2SQL), client)
        entry = record.instance_entries()[0]
        assert entry["error"].startswith("data:")
        assert entry["correct"] is False

    def test_parallel_run_preserves_order_and_score(self, t2s_instances, registry):
        endpoint = oracle_endpoint(t2s_instances)
        config = RunConfig(task=TEXT2SQL, parallelism=4)
        with make_client(endpoint) as client:
            record = run_text2sql(t2s_instances, registry, config, client)
        assert record.aggregates["ex"] == 100.0
        assert [e["instance_id"] for e in record.instance_entries()] == [
            i.id for i in t2s_instances
        ]


def _prior_record(entries):
    record = RunRecord.new(RunConfig(task=TEXT2SQL))
    for entry in entries:
        record.append(entry)
    return record


def _wrong_entry(instance, predicted):
    return {
        "kind": "instance",
        "task": TEXT2SQL,
        "instance_id": instance.id,
        "db_id": instance.db_id,
        "predicted_sql": predicted,
        "status": "ok",
        "correct": False,
    }


@pytest.fixture()
def debug_instances():
    return [
        BenchmarkInstance(
            id="A",
            db_id="concert_singer",
            question="How many singers do we have?",
            gold_sql="SELECT count(*) FROM singer",
        ),
        BenchmarkInstance(
            id="B",
            db_id="concert_singer",
            question="What is the maximum capacity of all stadiums?",
            gold_sql="SELECT max(Capacity) FROM stadium",
        ),
    ]


def _scripted_debugger(instances):
    """Round 1 fixes A's syntax error; B improves but stays wrong until
    round 2. Classification prompts always blame data processing."""
    a, b = instances
    endpoint = ScriptedEndpoint()
    endpoint.add(
        lambda p: p.startswith("You are an expert in SQL queries."),
        "Answer: Data Processing Error",
    )
    endpoint.add_contains("count(* FROM singer", a.gold_sql)
    endpoint.add_contains("SELECT min(Capacity) FROM stadium", "SELECT avg(Capacity) FROM stadium")
    endpoint.add_contains("SELECT avg(Capacity) FROM stadium", b.gold_sql)
    return endpoint


class TestSelfDebug:
    def test_two_round_repair_trajectory(self, debug_instances, registry):
        a, b = debug_instances
        prior = _prior_record(
            [
                _wrong_entry(a, "SELECT count(* FROM singer"),
                _wrong_entry(b, "SELECT min(Capacity) FROM stadium"),
            ]
        )
        endpoint = _scripted_debugger(debug_instances)
        config = RunConfig(task=SELF_DEBUG, rounds=2, strategy=WRONG_SQL_ALL_COMMENT)
        with make_client(endpoint) as client:
            record = run_self_debug(prior, debug_instances, registry, config, client)
        agg = record.aggregates
        assert agg["ex_trajectory"] == [0.0, 50.0, 100.0]
        assert agg["system_error_counts"] == [1, 0, 0]
        assert agg["result_error_counts"] == [1, 1, 0]
        assert agg["corrected"] == 2
        assert agg["final_ex"] == 100.0
        assert agg["ex_improvement"] == 100.0
        assert agg["initially_wrong"] == 2
        by_id = {e["instance_id"]: e for e in record.instance_entries()}
        assert by_id["A"]["corrected_round"] == 1
        assert by_id["B"]["corrected_round"] == 2
        assert by_id["B"]["final_sql"] == b.gold_sql

    def test_system_error_round_shows_engine_message(self, debug_instances, registry):
        a, b = debug_instances
        prior = _prior_record([_wrong_entry(a, "SELECT count(* FROM singer")])
        endpoint = _scripted_debugger(debug_instances)
        config = RunConfig(task=SELF_DEBUG, rounds=1, strategy=WRONG_SQL_ALL_COMMENT)
        with make_client(endpoint) as client:
            record = run_self_debug(prior, debug_instances, registry, config, client)
        step = record.instance_entries()[0]["rounds"][0]
        assert step["diagnosis"]["kind"] == "system_error"
        assert "syntax error" in step["diagnosis"]["system_message"]
        assert step["correct"] is True

    def test_population_includes_prior_correct(self, debug_instances, t2s_instances, registry):
        a, b = debug_instances
        correct_entry = {
            "kind": "instance",
            "task": TEXT2SQL,
            "instance_id": "3",
            "db_id": "concert_singer",
            "predicted_sql": "SELECT count(*) FROM concert WHERE Year = '2014'",
            "correct": True,
        }
        prior = _prior_record(
            [correct_entry, _wrong_entry(a, "SELECT count(* FROM singer")]
        )
        endpoint = _scripted_debugger(debug_instances)
        config = RunConfig(task=SELF_DEBUG, rounds=1, strategy=WRONG_SQL_ALL_COMMENT)
        with make_client(endpoint) as client:
            record = run_self_debug(prior, debug_instances, registry, config, client)
        agg = record.aggregates
        assert agg["population"] == 2
        assert agg["initially_correct"] == 1
        assert agg["ex_trajectory"] == [50.0, 100.0]

    def test_regenerate_with_deterministic_stub_never_improves(
        self, debug_instances, registry, tmp_path
    ):
        a, b = debug_instances
        prior = _prior_record([_wrong_entry(b, "SELECT min(Capacity) FROM stadium")])
        endpoint = ScriptedEndpoint(default="SELECT 1")
        config = RunConfig(task=SELF_DEBUG, rounds=3, strategy=REGENERATE)
        with make_client(endpoint, cache_dir=tmp_path) as client:
            record = run_self_debug(prior, debug_instances, registry, config, client)
        agg = record.aggregates
        assert agg["ex_trajectory"] == [0.0, 0.0, 0.0, 0.0]
        assert agg["corrected"] == 0
        # the repeated identical prompt was answered from cache after round 1
        assert endpoint.calls == 1

    def test_missing_instance_skipped(self, debug_instances, registry):
        ghost = {
            "kind": "instance",
            "task": TEXT2SQL,
            "instance_id": "ghost",
            "db_id": "concert_singer",
            "predicted_sql": "SELECT 2",
            "correct": False,
        }
        prior = _prior_record([ghost])
        config = RunConfig(task=SELF_DEBUG, rounds=1)
        with make_client(ScriptedEndpoint()) as client:
            record = run_self_debug(prior, debug_instances, registry, config, client)
        skips = [e for e in record.entries if e.get("kind") == "skip"]
        assert skips and skips[0]["instance_id"] == "ghost"
        assert record.aggregates["initially_wrong"] == 0

    def test_extraction_failure_becomes_system_error(self, debug_instances, registry):
        a, b = debug_instances
        prior = _prior_record([_wrong_entry(b, "SELECT min(Capacity) FROM stadium")])
        endpoint = ScriptedEndpoint(default="No answer available, sorry.")
        endpoint.add(
            lambda p: p.startswith("You are an expert in SQL queries."),
            "Answer: Data Processing Error",
        )
        config = RunConfig(task=SELF_DEBUG, rounds=2, strategy=WRONG_SQL_ALL_COMMENT)
        with make_client(endpoint) as client:
            record = run_self_debug(prior, debug_instances, registry, config, client)
        agg = record.aggregates
        # round 1 produced no SQL at all, so round 2 sees a system error
        assert agg["system_error_counts"] == [0, 1, 1]
        entry = record.instance_entries()[0]
        assert entry["rounds"][0]["extract_error"]
        assert entry["rounds"][1]["diagnosis"]["kind"] == "system_error"
        assert entry["final_sql"] is None


class TestGeneralDebug:
    def test_separate_debugger_repairs(self, debug_instances, registry):
        a, b = debug_instances
        prior = _prior_record([_wrong_entry(a, "SELECT count(* FROM singer")])
        endpoint = _scripted_debugger(debug_instances)
        config = RunConfig(
            task=GENERAL_DEBUG,
            rounds=1,
            strategy=WRONG_SQL_ALL_COMMENT,
            debugger_model=_stub_endpoint_config(),
        )
        with make_client(endpoint) as debugger:
            record = run_general_debug(prior, debug_instances, registry, config, debugger)
        assert record.aggregates["task"] == GENERAL_DEBUG
        assert record.aggregates["final_ex"] == 100.0


class TestOptimization:
    def _rewrite_oracle(self, instances):
        endpoint = oracle_endpoint(instances)
        return endpoint

    def test_two_stage_with_identity_rewrite(self, t2s_instances, registry):
        endpoint = self._rewrite_oracle(t2s_instances)
        config = RunConfig(task=OPTIMIZATION, mode="two_stage")
        clock = SteppingClock()
        with make_client(endpoint) as client:
            record = run_optimization(
                t2s_instances, registry, config, client, clock=clock
            )
        agg = record.aggregates
        assert agg["ex"] == 100.0
        assert agg["stage1_ex"] == 100.0
        assert agg["cves"] == pytest.approx(100.0)
        assert agg["ves"] == pytest.approx(agg["cves"] * agg["ex"] / 100.0)
        assert agg["variant_label"] == "w/ Y + S + Q"
        for entry in record.instance_entries():
            assert entry["mode"] == "two_stage"
            assert entry["stage1_sql"]
            assert entry["r_efficiency"] == pytest.approx(1.0)
            assert "timing_failed" not in entry

    def test_two_stage_reuses_prior_stage1(self, t2s_instances, registry):
        endpoint = self._rewrite_oracle(t2s_instances)
        with make_client(endpoint) as client:
            stage1 = run_text2sql(t2s_instances, registry, RunConfig(task=TEXT2SQL), client)
            generation_calls = endpoint.calls
            record = run_optimization(
                t2s_instances,
                registry,
                RunConfig(task=OPTIMIZATION, mode="two_stage"),
                client,
                stage1=stage1,
                clock=SteppingClock(),
            )
        # only the rewrite prompts hit the endpoint in stage 2
        assert endpoint.calls == generation_calls + len(t2s_instances)
        assert record.aggregates["stage1_ex"] == 100.0

    def test_timing_failure_scores_neutral(self, t2s_instances, registry):
        endpoint = self._rewrite_oracle(t2s_instances)
        config = RunConfig(task=OPTIMIZATION, mode="two_stage")
        constant_clock = lambda: 5.0  # noqa: E731 - zero measured duration
        with make_client(endpoint) as client:
            record = run_optimization(
                t2s_instances[:2], registry, config, client, clock=constant_clock
            )
        for entry in record.instance_entries():
            assert entry["r_efficiency"] == 1.0
            assert "timing_failed" in entry
        agg = record.aggregates
        assert agg["ves"] == pytest.approx(agg["cves"] * agg["ex"] / 100.0)

    def test_direct_mode_uses_efficiency_prompt(self, t2s_instances, registry):
        endpoint = self._rewrite_oracle(t2s_instances)
        config = RunConfig(task=OPTIMIZATION, mode=DIRECT)
        with make_client(endpoint) as client:
            record = run_optimization(
                t2s_instances, registry, config, client, clock=SteppingClock()
            )
        assert all(
            p.splitlines()[0].startswith("### Answer the question by the most efficient")
            for p in endpoint.prompts
        )
        agg = record.aggregates
        assert agg["mode"] == DIRECT
        assert agg["variant"] is None
        assert agg["stage1_ex"] is None
        assert agg["ex"] == 100.0
        assert all(e["mode"] == DIRECT for e in record.instance_entries())

    def test_failed_rewrite_entry_has_no_ratio(self, t2s_instances, registry):
        instance = t2s_instances[0]
        endpoint = ScriptedEndpoint(default=instance.gold_sql)
        endpoint.add_contains("Rewrite and optimize", "SELECT wrong_col FROM singer")
        config = RunConfig(task=OPTIMIZATION, mode="two_stage")
        with make_client(endpoint) as client:
            record = run_optimization(
                [instance], registry, config, client, clock=SteppingClock()
            )
        entry = record.instance_entries()[0]
        assert entry["correct"] is False
        assert entry["stage1_correct"] is True
        assert "r_efficiency" not in entry
        assert record.aggregates["ves"] == 0.0
        assert record.aggregates["cves"] is None


class TestSqlToText:
    def _verbatim_endpoint(self, instances):
        endpoint = ScriptedEndpoint(default="question:not a real question")
        for instance in instances:
            endpoint.add_contains(
                f"<SQL>{instance.gold_sql}</SQL>", f"question:{instance.question}"
            )
        return endpoint

    def test_verbatim_restatement_scores_one(self, t2s_instances, registry):
        endpoint = self._verbatim_endpoint(t2s_instances)
        config = RunConfig(task=SQL_TO_TEXT)
        with make_client(endpoint) as client:
            record = run_sql2text(t2s_instances, registry, config, client)
        agg = record.aggregates
        assert agg["rouge1"] == pytest.approx(1.0)
        assert agg["rouge2"] == pytest.approx(1.0)
        assert agg["rougeL"] == pytest.approx(1.0)
        assert agg["consistency_rate"] is None
        assert agg["evaluated"] == 0
        for entry, instance in zip(record.instance_entries(), t2s_instances):
            assert entry["predicted_question"] == instance.question

    def test_evaluator_consistency(self, t2s_instances, registry):
        endpoint = self._verbatim_endpoint(t2s_instances)
        judge = ScriptedEndpoint(default="True")
        config = RunConfig(task=SQL_TO_TEXT)
        with make_client(endpoint) as client, make_client(judge) as evaluator:
            record = run_sql2text(
                t2s_instances, registry, config, client, evaluator=evaluator
            )
        agg = record.aggregates
        assert agg["consistency_rate"] == 100.0
        assert agg["evaluated"] == len(t2s_instances)
        # two judgements per instance, one per direction
        assert judge.calls == 2 * len(t2s_instances)

    def test_disagreeing_evaluator(self, t2s_instances, registry):
        endpoint = self._verbatim_endpoint(t2s_instances)
        judge = ScriptedEndpoint(default="False")
        config = RunConfig(task=SQL_TO_TEXT)
        with make_client(endpoint) as client, make_client(judge) as evaluator:
            record = run_sql2text(
                t2s_instances, registry, config, client, evaluator=evaluator
            )
        assert record.aggregates["consistency_rate"] == 0.0

    def test_extraction_failure_scores_zero_rouge(self, t2s_instances, registry):
        instance = t2s_instances[0]
        endpoint = ScriptedEndpoint(default="I refuse to answer in the given format.")
        config = RunConfig(task=SQL_TO_TEXT)
        with make_client(endpoint) as client:
            record = run_sql2text([instance], registry, config, client)
        entry = record.instance_entries()[0]
        assert entry["rouge"] == (0.0, 0.0, 0.0)
        assert entry["extract_error"]
        assert record.aggregates["rouge1"] == 0.0

    def test_evidence_included_in_prompt(self, registry):
        instance = BenchmarkInstance(
            id="e1",
            db_id="concert_singer",
            question="How many adults?",
            gold_sql="SELECT count(*) FROM singer WHERE Age > 20",
            evidence="adults means Age > 20",
        )
        endpoint = ScriptedEndpoint(default="question:How many adults?")
        config = RunConfig(task=SQL_TO_TEXT)
        with make_client(endpoint) as client:
            run_sql2text([instance], registry, config, client)
        assert "<Evidence>adults means Age > 20</Evidence>" in endpoint.prompts[0]


class TestSchemaLinking:
    def _linking_oracle(self, instances, concert_catalog):
        endpoint = oracle_endpoint(instances)

        def tables_for(prompt):
            for instance in instances:
                if instance.question in prompt:
                    gt = extract_entities(instance.gold_sql, concert_catalog).tables
                    names = [concert_catalog.canonical_table(t) for t in sorted(gt)]
                    return "[" + ", ".join(f'"{n}"' for n in names) + "]"
            return '["singer"]'

        endpoint.add_contains("Given the database schema and question", tables_for)
        return endpoint

    def test_oracle_all_methods_perfect(self, t2s_instances, registry, concert_catalog):
        endpoint = self._linking_oracle(t2s_instances, concert_catalog)
        config = RunConfig(task=SCHEMA_LINKING, method="all")
        with make_client(endpoint) as client:
            record = run_schema_linking(t2s_instances, registry, config, client)
        agg = record.aggregates
        assert agg["n"] == 6
        assert agg["methods"] == ["zero_shot", "few_shot", "presql", "few_shot_plus_presql"]
        assert agg["fk_settings"] == ["no_fk", "fk"]
        for method in agg["methods"]:
            for fk_key in ("no_fk", "fk"):
                cell = agg["matrix"][method][fk_key]
                assert cell["res"] == pytest.approx(1.0)
                assert cell["subset"] == 1.0
                assert cell["exact"] == 1.0
                assert cell["n"] == 6

    def test_gt_tables_recorded(self, t2s_instances, registry, concert_catalog):
        endpoint = self._linking_oracle(t2s_instances, concert_catalog)
        config = RunConfig(task=SCHEMA_LINKING, method="zero_shot")
        with make_client(endpoint) as client:
            record = run_schema_linking(t2s_instances, registry, config, client)
        by_id = {e["instance_id"]: e for e in record.instance_entries()}
        assert by_id["1"]["gt_tables"] == ["singer"]
        assert by_id["6"]["gt_tables"] == [
            "concert", "singer", "singer_in_concert", "stadium"
        ]

    def test_single_method_single_fk(self, t2s_instances, registry, concert_catalog):
        endpoint = self._linking_oracle(t2s_instances, concert_catalog)
        config = RunConfig(task=SCHEMA_LINKING, method="presql")
        with make_client(endpoint) as client:
            record = run_schema_linking(
                t2s_instances, registry, config, client, fk_settings=(False,)
            )
        agg = record.aggregates
        assert agg["methods"] == ["presql"]
        assert agg["fk_settings"] == ["no_fk"]
        assert agg["matrix"]["presql"]["fk"] is None
        assert agg["matrix"]["presql"]["no_fk"]["res"] == pytest.approx(1.0)

    def test_union_method_reuses_components(self, t2s_instances, registry, concert_catalog):
        instance = t2s_instances[0]
        endpoint = self._linking_oracle([instance], concert_catalog)
        config = RunConfig(task=SCHEMA_LINKING, method="few_shot_plus_presql")
        with make_client(endpoint) as client:
            run_schema_linking([instance], registry, config, client, fk_settings=(False,))
        # one few-shot prompt and one generation prompt, nothing duplicated
        assert endpoint.calls == 2

    def test_overretrieval_penalized(self, registry):
        instance = BenchmarkInstance(
            id="1",
            db_id="concert_singer",
            question="How many singers do we have?",
            gold_sql="SELECT count(*) FROM singer",
        )
        endpoint = ScriptedEndpoint(
            default='["singer", "stadium", "concert", "singer_in_concert"]'
        )
        config = RunConfig(task=SCHEMA_LINKING, method="zero_shot")
        with make_client(endpoint) as client:
            record = run_schema_linking(
                [instance], registry, config, client, fk_settings=(False,)
            )
        cell = record.aggregates["matrix"]["zero_shot"]["no_fk"]
        assert cell["res"] == pytest.approx(0.5)  # sqrt(1/4)
        assert cell["subset"] == 1.0
        assert cell["exact"] == 0.0

    def test_unparseable_gold_reported(self, registry):
        bad = BenchmarkInstance(
            id="bad", db_id="concert_singer", question="?", gold_sql="SELEC nonsense"
        )
        config = RunConfig(task=SCHEMA_LINKING, method="zero_shot")
        with make_client(ScriptedEndpoint()) as client:
            record = run_schema_linking([bad], registry, config, client)
        entry = record.instance_entries()[0]
        assert "unparseable" in entry["error"]
        assert record.aggregates["n"] == 0


class TestRescoreEquivalence:
    def test_cache_only_rerun_matches(self, t2s_instances, registry, tmp_path):
        endpoint = oracle_endpoint(t2s_instances)
        config = RunConfig(task=TEXT2SQL)
        with make_client(endpoint, cache_dir=tmp_path) as client:
            first = run_text2sql(t2s_instances, registry, config, client)
        with make_client(None, cache_dir=tmp_path, offline=True) as offline:
            second = run_text2sql(t2s_instances, registry, config, offline, )
        assert second.aggregates == first.aggregates
        strip = lambda e: {k: v for k, v in e.items()}  # noqa: E731
        assert [strip(e) for e in second.entries] == [strip(e) for e in first.entries]
