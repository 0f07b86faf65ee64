"""Shared fixtures: SQLite databases, instance files and scripted endpoints."""

from __future__ import annotations

import json
import sqlite3
from pathlib import Path

import httpx
import pytest

from sqlbench.dataset import (
    BenchmarkInstance,
    ColumnInfo,
    DatabaseCatalog,
    DatabaseRegistry,
    TableSchema,
)
from sqlbench.llmclient import LlmClient, ModelEndpointConfig

# ---------------------------------------------------------------------------
# Databases
# ---------------------------------------------------------------------------

CONCERT_SCHEMA = [
    """CREATE TABLE stadium (
        Stadium_ID INTEGER PRIMARY KEY,
        Location TEXT,
        Name TEXT,
        Capacity INTEGER,
        Highest INTEGER,
        Lowest INTEGER,
        Average INTEGER
    )""",
    """CREATE TABLE singer (
        Singer_ID INTEGER PRIMARY KEY,
        Name TEXT,
        Country TEXT,
        Song_Name TEXT,
        Song_release_year TEXT,
        Age INTEGER,
        Is_male TEXT
    )""",
    """CREATE TABLE concert (
        concert_ID INTEGER PRIMARY KEY,
        concert_Name TEXT,
        Theme TEXT,
        Stadium_ID INTEGER,
        Year TEXT,
        FOREIGN KEY (Stadium_ID) REFERENCES stadium(Stadium_ID)
    )""",
    """CREATE TABLE singer_in_concert (
        concert_ID INTEGER,
        Singer_ID INTEGER,
        PRIMARY KEY (concert_ID, Singer_ID),
        FOREIGN KEY (concert_ID) REFERENCES concert(concert_ID),
        FOREIGN KEY (Singer_ID) REFERENCES singer(Singer_ID)
    )""",
]

CONCERT_ROWS = {
    "stadium": [
        (1, "Glasgow", "Hampden Park", 52500, 52500, 10000, 32000),
        (2, "London", "Wembley Stadium", 90000, 90000, 30000, 65000),
        (3, "Manchester", "Old Trafford", 76000, 74000, 20000, 50000),
    ],
    "singer": [
        (1, "Joe Sharp", "Netherlands", "You", "1992", 52, "F"),
        (2, "Timbaland", "United States", "Dangerous", "2008", 32, "T"),
        (3, "Justin Brown", "France", "Hey Oh", "2013", 29, "T"),
        (4, "Rose White", "France", "Sun", "2003", 41, "F"),
        (5, "John Nizinik", "France", "Gentleman", "2014", 43, "T"),
        (6, "Tribal King", "France", "Love", "2016", 25, "T"),
    ],
    "concert": [
        (1, "Auditions", "Free choice", 1, "2014"),
        (2, "Super bootcamp", "Free choice 2", 2, "2014"),
        (3, "Home Visits", "Bleeding Love", 2, "2015"),
        (4, "Week 1", "Wide Awake", 3, "2014"),
    ],
    "singer_in_concert": [
        (1, 2),
        (1, 3),
        (1, 5),
        (2, 3),
        (2, 6),
        (3, 5),
        (4, 4),
        (4, 6),
    ],
}

GOV_SCHEMA = [
    """CREATE TABLE department (
        Department_ID INTEGER PRIMARY KEY,
        Name TEXT,
        Creation TEXT,
        Ranking INTEGER,
        Budget_in_Billions REAL,
        Num_Employees REAL
    )""",
    """CREATE TABLE head (
        head_ID INTEGER PRIMARY KEY,
        name TEXT,
        born_state TEXT,
        age REAL
    )""",
    """CREATE TABLE management (
        department_ID INTEGER,
        head_ID INTEGER,
        temporary_acting TEXT,
        PRIMARY KEY (department_ID, head_ID),
        FOREIGN KEY (department_ID) REFERENCES department(Department_ID),
        FOREIGN KEY (head_ID) REFERENCES head(head_ID)
    )""",
]

GOV_ROWS = {
    "department": [
        (1, "State", "1789", 1, 96.96, 30266.0),
        (2, "Treasury", "1789", 2, 11.1, 115897.0),
        (3, "Defense", "1947", 3, 439.3, 3000000.0),
        (4, "Justice", "1870", 4, 23.4, 112557.0),
        (5, "Interior", "1849", 5, 10.7, 71436.0),
    ],
    "head": [
        (1, "Tiger Woods", "Alabama", 67.0),
        (2, "Sergio Garcia", "California", 68.0),
        (3, "K. J. Choi", "Alabama", 69.0),
        (4, "Dudley Hart", "California", 52.0),
        (5, "Jeff Maggert", "Delaware", 53.0),
    ],
    "management": [
        (1, 1, "No"),
        (2, 5, "Yes"),
        (3, 4, "Yes"),
        (4, 2, "No"),
        (5, 3, "Yes"),
    ],
}

SCHOOLS_SCHEMA = [
    """CREATE TABLE schools (
        CDSCode TEXT PRIMARY KEY,
        School TEXT,
        AdmFName1 TEXT,
        AdmLName1 TEXT
    )""",
    """CREATE TABLE satscores (
        cds TEXT PRIMARY KEY,
        sname TEXT,
        NumTstTakr INTEGER,
        NumGE1500 INTEGER,
        FOREIGN KEY (cds) REFERENCES schools(CDSCode)
    )""",
]

SCHOOLS_ROWS = {
    "schools": [
        ("01", "Alpha High", "Carol", "Dobbs"),
        ("02", "Beta High", "Amy", "Breven"),
        ("03", "Gamma High", "Ross", "Fisher"),
    ],
    "satscores": [
        ("01", "Alpha High", 550, 400),
        ("02", "Beta High", 720, 1600),
        ("03", "Gamma High", 640, 1520),
    ],
}

SOCCER_SCHEMA = [
    """CREATE TABLE Team (
        id INTEGER PRIMARY KEY,
        team_api_id INTEGER,
        team_fifa_api_id INTEGER,
        team_long_name TEXT,
        team_short_name TEXT
    )""",
]

SOCCER_ROWS = {
    "Team": [
        (1, 9825, 1, "Arsenal", "ARS"),
        (2, 8650, 8, "Liverpool", "LIV"),
        (3, 10172, 32, "Queens Park Rangers", "QPR"),
    ],
}


def build_db(path: Path, schema: list[str], rows: dict) -> None:
    conn = sqlite3.connect(path)
    try:
        for statement in schema:
            conn.execute(statement)
        for table, table_rows in rows.items():
            if not table_rows:
                continue
            placeholders = ", ".join("?" for _ in table_rows[0])
            conn.executemany(f"INSERT INTO {table} VALUES ({placeholders})", table_rows)
        conn.commit()
    finally:
        conn.close()


@pytest.fixture(scope="session")
def db_root(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("databases")
    build_db(root / "concert_singer.sqlite", CONCERT_SCHEMA, CONCERT_ROWS)
    build_db(root / "department_management.sqlite", GOV_SCHEMA, GOV_ROWS)
    build_db(root / "california_schools.sqlite", SCHOOLS_SCHEMA, SCHOOLS_ROWS)
    build_db(root / "european_football.sqlite", SOCCER_SCHEMA, SOCCER_ROWS)
    return root


@pytest.fixture(scope="session")
def registry(db_root) -> DatabaseRegistry:
    return DatabaseRegistry(db_root)


@pytest.fixture(scope="session")
def concert_db(db_root) -> Path:
    return db_root / "concert_singer.sqlite"


@pytest.fixture(scope="session")
def concert_catalog(registry):
    return registry.catalog("concert_singer")


@pytest.fixture(scope="session")
def gov_catalog(registry):
    return registry.catalog("department_management")


@pytest.fixture(scope="session")
def schools_catalog(registry):
    return registry.catalog("california_schools")


@pytest.fixture(scope="session")
def soccer_catalog(registry):
    return registry.catalog("european_football")


@pytest.fixture(scope="session")
def ddl_catalog():
    """Hand-built two-table catalog with abstract NUMBER column types."""

    def col(name, type_name, pk=0):
        return ColumnInfo(name=name, type_name=type_name, pk_index=pk)

    stadium = TableSchema(
        "stadium",
        (
            col("stadium_id", "NUMBER", pk=1),
            col("location", "TEXT"),
            col("name", "TEXT"),
            col("capacity", "NUMBER"),
            col("highest", "NUMBER"),
            col("lowest", "NUMBER"),
            col("average", "NUMBER"),
        ),
    )
    singer = TableSchema(
        "singer",
        (
            col("singer_id", "NUMBER", pk=1),
            col("name", "TEXT"),
            col("country", "TEXT"),
            col("song_name", "TEXT"),
            col("song_release_year", "TEXT"),
            col("age", "NUMBER"),
            col("is_male", "TEXT"),
        ),
    )
    return DatabaseCatalog("concert_singer", [stadium, singer])


# ---------------------------------------------------------------------------
# Benchmark instances
# ---------------------------------------------------------------------------

T2S_RAW = [
    {
        "question_id": 1,
        "db_id": "concert_singer",
        "question": "How many singers do we have?",
        "evidence": "",
        "SQL": "SELECT count(*) FROM singer",
    },
    {
        "question_id": 2,
        "db_id": "concert_singer",
        "question": "What is the maximum capacity of all stadiums?",
        "evidence": "",
        "SQL": "SELECT max(Capacity) FROM stadium",
    },
    {
        "question_id": 3,
        "db_id": "concert_singer",
        "question": "How many concerts took place in 2014?",
        "evidence": "",
        "SQL": "SELECT count(*) FROM concert WHERE Year = '2014'",
    },
    {
        "question_id": 4,
        "db_id": "concert_singer",
        "question": "Show the stadium name and the number of concerts in each stadium.",
        "evidence": "",
        "SQL": (
            "SELECT T2.Name, count(*) FROM concert AS T1 JOIN stadium AS T2 "
            "ON T1.Stadium_ID = T2.Stadium_ID GROUP BY T1.Stadium_ID"
        ),
    },
    {
        "question_id": 5,
        "db_id": "concert_singer",
        "question": "Show the names of singers that performed in the Auditions concert.",
        "evidence": "",
        "SQL": (
            "SELECT T2.Name FROM singer_in_concert AS T1 JOIN singer AS T2 "
            "ON T1.Singer_ID = T2.Singer_ID JOIN concert AS T3 "
            "ON T1.concert_ID = T3.concert_ID WHERE T3.concert_Name = 'Auditions'"
        ),
    },
    {
        "question_id": 6,
        "db_id": "concert_singer",
        "question": "List the names of singers who performed in a stadium located in London.",
        "evidence": "",
        "SQL": (
            "SELECT T4.Name FROM stadium AS T1 JOIN concert AS T2 "
            "ON T1.Stadium_ID = T2.Stadium_ID JOIN singer_in_concert AS T3 "
            "ON T2.concert_ID = T3.concert_ID JOIN singer AS T4 "
            "ON T3.Singer_ID = T4.Singer_ID WHERE T1.Location = 'London'"
        ),
    },
]


@pytest.fixture(scope="session")
def t2s_instances() -> list[BenchmarkInstance]:
    return [
        BenchmarkInstance(
            id=str(e["question_id"]),
            db_id=e["db_id"],
            question=e["question"],
            gold_sql=e["SQL"],
            evidence=e["evidence"],
        )
        for e in T2S_RAW
    ]


@pytest.fixture()
def t2s_data_file(tmp_path) -> Path:
    path = tmp_path / "instances.json"
    path.write_text(json.dumps(T2S_RAW), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Scripted chat endpoint
# ---------------------------------------------------------------------------


class ScriptedEndpoint:
    """A fake chat-completions server: rules map prompts to completions."""

    def __init__(self, default: str = "SELECT 1"):
        self.rules: list = []
        self.default = default
        self.calls = 0
        self.prompts: list[str] = []

    def add(self, predicate, responder) -> "ScriptedEndpoint":
        self.rules.append((predicate, responder))
        return self

    def add_contains(self, needle: str, responder) -> "ScriptedEndpoint":
        return self.add(lambda p, n=needle: n in p, responder)

    def respond(self, prompt: str) -> str:
        for predicate, responder in self.rules:
            if predicate(prompt):
                return responder(prompt) if callable(responder) else responder
        return self.default(prompt) if callable(self.default) else self.default

    def handler(self, request: httpx.Request) -> httpx.Response:
        self.calls += 1
        payload = json.loads(request.content)
        prompt = payload["messages"][0]["content"]
        self.prompts.append(prompt)
        return httpx.Response(
            200,
            json={
                "choices": [{"message": {"role": "assistant", "content": self.respond(prompt)}}],
                "usage": {"prompt_tokens": 1, "completion_tokens": 1, "total_tokens": 2},
            },
        )

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self.handler)


def make_client(
    endpoint: ScriptedEndpoint | None,
    cache_dir: Path | None = None,
    offline: bool = False,
    **overrides,
) -> LlmClient:
    config = ModelEndpointConfig(
        base_url=overrides.pop("base_url", "http://stub.invalid/v1"),
        model_name=overrides.pop("model_name", "stub-model"),
        max_retries=overrides.pop("max_retries", 0),
        **overrides,
    )
    transport = endpoint.transport() if endpoint is not None else None
    return LlmClient(config, cache_dir=cache_dir, offline=offline, transport=transport)


def oracle_endpoint(instances: list[BenchmarkInstance]) -> ScriptedEndpoint:
    """Endpoint that answers any generation prompt with the instance's gold SQL."""

    def respond(prompt: str) -> str:
        for instance in instances:
            if instance.question in prompt:
                return instance.gold_sql
        return "SELECT 1"

    return ScriptedEndpoint(default=respond)
