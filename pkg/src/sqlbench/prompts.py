"""Prompt construction for every evaluated task.

Templates combine three features: the schema serialization (DDL or
SimpleDDL), the wrapping dialect (Markdown, HTML or code comments) and the
answer mode (chat or SELECT-completion). Task-specific templates cover
debugging, optimization, SQL-to-text, consistency checking, schema linking
and error classification. All rendering is pure; lines are joined with a
single newline and never carry trailing whitespace.
"""

from __future__ import annotations

from dataclasses import dataclass

from .classifier import RESULT_ERROR_NOTICE, SYSTEM_ERROR, display_name
from .dataset import DatabaseCatalog, TableSchema
from .errors import ConfigError

DDL = "DDL"
SIMPLE_DDL = "SimpleDDL"
MD = "MD"
HTML = "HTML"
CODING = "Coding"
CHAT = "Chat"
COMPLETE = "Complete"

FREE_SQL = "free_sql"
COMPLETION_AFTER_SELECT = "completion_after_select"
BRACKETED_TABLE_LIST = "bracketed_table_list"
QUESTION_TEXT = "question_text"
TRUE_FALSE = "true_false"
ERROR_CATEGORY = "error_category"

REGENERATE = "regenerate"
WRONG_SQL = "wrong_sql"
WRONG_SQL_SYSTEM = "wrong_sql_system"
WRONG_SQL_ALL = "wrong_sql_all"
WRONG_SQL_ALL_COMMENT = "wrong_sql_all_comment"

DEBUG_STRATEGIES = (
    REGENERATE,
    WRONG_SQL,
    WRONG_SQL_SYSTEM,
    WRONG_SQL_ALL,
    WRONG_SQL_ALL_COMMENT,
)

DEBUG_STRATEGY_LABELS = {
    REGENERATE: "Regenerate",
    WRONG_SQL: "w/ Wrong SQL",
    WRONG_SQL_SYSTEM: "w/ Wrong SQL + System_error_info",
    WRONG_SQL_ALL: "w/ Wrong SQL + All_error_info",
    WRONG_SQL_ALL_COMMENT: "w/ Wrong SQL + All_error_info + Comment",
}

Y_ONLY = "y_only"
Y_SCHEMA = "y_schema"
Y_SCHEMA_Q = "y_schema_q"
DEMO = "demo"
DEMO_COMMENTS = "demo_comments"

OPTIMIZATION_VARIANTS = (Y_ONLY, Y_SCHEMA, Y_SCHEMA_Q, DEMO, DEMO_COMMENTS)

OPTIMIZATION_VARIANT_LABELS = {
    Y_ONLY: "with Y",
    Y_SCHEMA: "w/ Y + S",
    Y_SCHEMA_Q: "w/ Y + S + Q",
    DEMO: "w/ demo",
    DEMO_COMMENTS: "w/ demo + comments",
}

ZERO_SHOT = "zero_shot"
FEW_SHOT = "few_shot"


@dataclass(frozen=True)
class TemplateSpec:
    schema_style: str
    wrap_style: str
    answer_style: str
    include_foreign_keys: bool = False
    efficiency_variant: bool = False

    def __post_init__(self):
        if self.schema_style not in (DDL, SIMPLE_DDL):
            raise ConfigError(f"unknown schema style {self.schema_style!r}")
        if self.wrap_style not in (MD, HTML, CODING):
            raise ConfigError(f"unknown wrap style {self.wrap_style!r}")
        if self.answer_style not in (CHAT, COMPLETE):
            raise ConfigError(f"unknown answer style {self.answer_style!r}")
        if self.efficiency_variant and (
            self.schema_style,
            self.wrap_style,
            self.answer_style,
        ) != (SIMPLE_DDL, MD, CHAT):
            raise ConfigError("the efficiency variant exists only for SimpleDDL-MD-Chat")

    @property
    def name(self) -> str:
        base = f"{self.schema_style}-{self.wrap_style}-{self.answer_style}"
        return f"{base}-Efficiency" if self.efficiency_variant else base

    @classmethod
    def from_name(cls, name: str) -> "TemplateSpec":
        parts = name.split("-")
        efficiency = False
        if parts and parts[-1].lower() == "efficiency":
            efficiency = True
            parts = parts[:-1]
        if len(parts) != 3:
            raise ConfigError(f"malformed template name {name!r}")
        schema = {"ddl": DDL, "simpleddl": SIMPLE_DDL}.get(parts[0].lower())
        wrap = {"md": MD, "html": HTML, "coding": CODING}.get(parts[1].lower())
        answer = {"chat": CHAT, "complete": COMPLETE}.get(parts[2].lower())
        if schema is None or wrap is None or answer is None:
            raise ConfigError(f"malformed template name {name!r}")
        return cls(schema, wrap, answer, efficiency_variant=efficiency)


# the eight template names reported in the end-to-end comparison
PRESET_TEMPLATES = (
    "DDL-HTML-Chat",
    "DDL-HTML-Complete",
    "DDL-MD-Chat",
    "DDL-MD-Complete",
    "DDL-Coding-Chat",
    "DDL-Coding-Complete",
    "SimpleDDL-MD-Chat",
    "SimpleDDL-MD-Complete",
)

DEFAULT_TEMPLATE = "SimpleDDL-MD-Chat"


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    spec: "TemplateSpec | str"
    expected_answer_mode: str

    def __post_init__(self):
        if not self.text:
            raise ValueError("rendered prompt must be non-empty")


# ---------------------------------------------------------------------------
# Schema serialization
# ---------------------------------------------------------------------------


def _simpleddl_line(table: TableSchema) -> str:
    return f"{table.name}({','.join(table.column_names())})"


def _ddl_line(table: TableSchema) -> str:
    parts = []
    pk = table.primary_key
    for column in table.columns:
        piece = column.name if not column.type_name else f"{column.name} {column.type_name}"
        if len(pk) == 1 and column.pk_index == 1:
            piece += " PRIMARY KEY"
        parts.append(piece)
    if len(pk) > 1:
        parts.append(f"PRIMARY KEY ({', '.join(pk)})")
    for fk in table.foreign_keys:
        parts.append(f"FOREIGN KEY ({fk.column}) REFERENCES {fk.ref_table}({fk.ref_column})")
    return f"CREATE TABLE {table.name} ({', '.join(parts)});"


def foreign_key_lines(catalog: DatabaseCatalog) -> list[str]:
    return [
        f"{table}({fk.column}) REFERENCES {fk.ref_table}({fk.ref_column})"
        for table, fk in catalog.foreign_keys()
    ]


def render_schema(catalog: DatabaseCatalog, style: str, with_fk: bool = False) -> str:
    """Serialize a catalog: CREATE TABLE statements or table(col,...) lines."""
    if style == DDL:
        lines = [_ddl_line(t) for t in catalog.tables]
    elif style == SIMPLE_DDL:
        lines = [_simpleddl_line(t) + ";" for t in catalog.tables]
    else:
        raise ConfigError(f"unknown schema style {style!r}")
    if with_fk:
        fk_lines = foreign_key_lines(catalog)
        if fk_lines:
            lines.append("Foreign key:")
            lines.extend(fk_lines)
    return "\n".join(lines)


def _simpleddl_block(catalog: DatabaseCatalog, with_fk: bool = False) -> list[str]:
    # terminated with ";" per table, "." closing the final one
    lines = [_simpleddl_line(t) + ";" for t in catalog.tables]
    lines[-1] = lines[-1][:-1] + "."
    if with_fk:
        fk_lines = foreign_key_lines(catalog)
        if fk_lines:
            lines.append("Foreign key:")
            lines.extend(fk_lines)
    return lines


def _hash_wrapped_schema(catalog: DatabaseCatalog, with_fk: bool = False) -> list[str]:
    return ["#"] + [f"# {line}" for line in _simpleddl_block(catalog, with_fk)] + ["#"]


def _linking_schema(catalog: DatabaseCatalog, with_fk: bool) -> list[str]:
    lines = [f"# {_simpleddl_line(t)}" for t in catalog.tables]
    if with_fk:
        fk_lines = foreign_key_lines(catalog)
        if fk_lines:
            lines.append("Foreign key:")
            lines.extend(fk_lines)
    return lines


# ---------------------------------------------------------------------------
# Text-to-SQL
# ---------------------------------------------------------------------------

_MD_INSTRUCTION = "### Answer the question by sqlite SQL query only and with no explanation"
_MD_EFFICIENCY_INSTRUCTION = (
    "### Answer the question by the most efficient sqlite SQL query only and with no explanation"
)
_MD_SCHEMA_HEADER = "### Sqlite SQL tables, with their properties:"
_HTML_INSTRUCTION = (
    "Figure out corresponding SQLite SQL Query of Question according to database."
)
_CODING_SCHEMA_HEADER = "/* Given the following database schema: */"


def render_text2sql(catalog: DatabaseCatalog, question: str, spec: TemplateSpec) -> RenderedPrompt:
    """Build the zero-shot question-to-SQL prompt for one template."""
    with_fk = spec.include_foreign_keys  # DDL statements already carry their FK clauses
    if spec.wrap_style == MD:
        lines = [_MD_EFFICIENCY_INSTRUCTION if spec.efficiency_variant else _MD_INSTRUCTION]
        lines.append(_MD_SCHEMA_HEADER)
        if spec.schema_style == SIMPLE_DDL:
            lines.extend(_hash_wrapped_schema(catalog, with_fk))
            lines.append(f"### {question}")
        else:
            lines.extend(_ddl_line(t) for t in catalog.tables)
            lines.append(f"### Question: {question}")
        lines.append("### SQL: SELECT" if spec.answer_style == COMPLETE else "### SQL:")
    elif spec.wrap_style == HTML:
        lines = [_HTML_INSTRUCTION, "<Database>"]
        if spec.schema_style == SIMPLE_DDL:
            lines.extend(_simpleddl_block(catalog, with_fk))
        else:
            lines.extend(_ddl_line(t) for t in catalog.tables)
        lines.append("</Database>")
        lines.append(f"<Question>{question}</Question>")
        if spec.answer_style == COMPLETE:
            lines.append("<SQL> SELECT")
    else:
        lines = [_CODING_SCHEMA_HEADER]
        if spec.schema_style == SIMPLE_DDL:
            lines.extend(_simpleddl_block(catalog, with_fk))
        else:
            ddl_lines = [_ddl_line(t) for t in catalog.tables]
            for i, line in enumerate(ddl_lines):
                if i:
                    lines.append("")
                lines.append(line)
        lines.append("")
        lines.append(
            f"/* Answer the following by SQLite SQL Query according to database: {question} */"
        )
        lines.append("/* SQL Query here*/")
        if spec.answer_style == COMPLETE:
            lines.append("SELECT")
    mode = COMPLETION_AFTER_SELECT if spec.answer_style == COMPLETE else FREE_SQL
    return RenderedPrompt(text="\n".join(lines), spec=spec, expected_answer_mode=mode)


# ---------------------------------------------------------------------------
# Debugging
# ---------------------------------------------------------------------------

_DEBUG_INSTRUCTION_FULL = (
    "### Write the correct SQLite SQL Query corresponding to the Question based on the "
    "database, the Wrong SQL Query and the cause of the error."
)
_DEBUG_INSTRUCTION_BARE = (
    "### Write the correct SQLite SQL Query corresponding to the Question based on the "
    "database and the Wrong SQL Query."
)


def render_debug(
    catalog: DatabaseCatalog,
    question: str,
    wrong_sql: str | None,
    strategy: str,
    diagnosis=None,
    spec: TemplateSpec | None = None,
) -> RenderedPrompt:
    """Build a repair prompt at one of the five information tiers.

    The lowest tier re-issues the plain generation prompt. Higher tiers show
    the wrong query, then increasingly specific cause information: the raw
    system/result notice, the diagnosed category, and finally the category's
    annotation comment.
    """
    if strategy not in DEBUG_STRATEGIES:
        raise ConfigError(f"unknown debug strategy {strategy!r}")
    if strategy == REGENERATE:
        base = spec if spec is not None else TemplateSpec.from_name(DEFAULT_TEMPLATE)
        return render_text2sql(catalog, question, base)
    if not wrong_sql:
        raise ValueError(f"strategy {strategy!r} requires the wrong SQL")
    if strategy != WRONG_SQL and diagnosis is None:
        raise ValueError(f"strategy {strategy!r} requires a diagnosis")

    instruction = _DEBUG_INSTRUCTION_BARE if strategy == WRONG_SQL else _DEBUG_INSTRUCTION_FULL
    lines = [instruction, _MD_SCHEMA_HEADER]
    lines.extend(_hash_wrapped_schema(catalog))
    lines.append(f"### Question: {question}")
    lines.append("### Wrong SQL Query:")
    lines.append(wrong_sql)
    if strategy != WRONG_SQL:
        lines.append("### Error Information:")
        lines.extend(_error_information(strategy, diagnosis))
    lines.append("### Correct SQL:")
    return RenderedPrompt(
        text="\n".join(lines),
        spec=DEBUG_STRATEGY_LABELS[strategy],
        expected_answer_mode=FREE_SQL,
    )


def _error_information(strategy: str, diagnosis) -> list[str]:
    if diagnosis.kind == SYSTEM_ERROR:
        return (diagnosis.system_message or "").splitlines() or [""]
    lines = [RESULT_ERROR_NOTICE]
    if strategy == WRONG_SQL_ALL:
        if diagnosis.subcategory is None:
            raise ValueError("result-error diagnosis lacks a subcategory")
        lines.append(f"Error Type: {display_name(diagnosis.subcategory)} Error.")
    elif strategy == WRONG_SQL_ALL_COMMENT:
        if not diagnosis.comment:
            raise ValueError("comment strategy requires a diagnosis comment")
        lines.extend(diagnosis.comment.splitlines())
    return lines


# ---------------------------------------------------------------------------
# Optimization
# ---------------------------------------------------------------------------

_OPTIMIZATION_INSTRUCTION = (
    "### Rewrite and optimize the given SQL query to improve SQL query efficiency and "
    "minimize SQL execution time while ensuring correctness. Only output sql query, do "
    "not output any other content.Only output sql query, do not output any other content."
)

_DEMO_CASES = (
    (
        "List out the age of users who located in Vienna, Austria obtained the badge?",
        "SELECT Age FROM users WHERE Location = 'Vienna, Austria' AND Id IN (SELECT UserId FROM badges)",
        "SELECT u.Age FROM users AS u INNER JOIN badges AS b ON u.Id = b.UserId WHERE u.Location = 'Vienna, Austria'",
        "By applying a JOIN operation instead of a subquery with IN can improve efficiency, "
        "as the database may execute the JOIN and filtering processes concurrently in just "
        "one operation without the need to store the intermediate results to filter primary query.",
    ),
    (
        "How many posts are there?",
        "SELECT COUNT(*) FROM posts",
        "SELECT COUNT(Id) FROM posts",
        "Counting a single indexed column with COUNT(<column_name>) instead of COUNT(*) "
        "can improve efficiency, as the database can answer from the index without "
        "reading entire rows.",
    ),
)


def render_optimization(
    sql: str,
    catalog: DatabaseCatalog | None = None,
    question: str | None = None,
    variant: str = Y_ONLY,
) -> RenderedPrompt:
    """Build a rewrite-for-efficiency prompt in one of five variants."""
    if variant not in OPTIMIZATION_VARIANTS:
        raise ConfigError(f"unknown optimization variant {variant!r}")
    if not sql:
        raise ValueError("optimization requires the SQL to rewrite")
    needs_schema = variant != Y_ONLY
    needs_question = variant in (Y_SCHEMA_Q, DEMO, DEMO_COMMENTS)
    if needs_schema and catalog is None:
        raise ValueError(f"variant {variant!r} requires a catalog")
    if needs_question and question is None:
        raise ValueError(f"variant {variant!r} requires the question")

    lines = [_OPTIMIZATION_INSTRUCTION]
    if variant in (DEMO, DEMO_COMMENTS):
        lines.append("### Here are some reference cases:")
        lines.append("#")
        for demo_question, before, after, explanation in _DEMO_CASES:
            lines.append(f"# Question: {demo_question}")
            lines.append(f"# SQL Query: {before}")
            lines.append(f"# New SQL Query: {after}")
            if variant == DEMO_COMMENTS:
                lines.append(f"# Explanation: {explanation}")
        lines.append("#")
    if needs_schema:
        lines.append(_MD_SCHEMA_HEADER)
        lines.extend(_hash_wrapped_schema(catalog))
    if needs_question:
        lines.append(f"### Question: {question}")
    lines.append(f"### SQL Query:{sql}")
    lines.append("### New SQL Query:")
    return RenderedPrompt(
        text="\n".join(lines),
        spec=OPTIMIZATION_VARIANT_LABELS[variant],
        expected_answer_mode=FREE_SQL,
    )


# ---------------------------------------------------------------------------
# SQL-to-Text and consistency
# ---------------------------------------------------------------------------

_SQL2TEXT_HEADER = (
    "<Instruction>",
    "You are an expert in database analysis and processing of SQL statements.",
    "I will provide an SQL statement and relevant evidence. You need to help me analyze "
    "what problem this SQL statement is solving.",
    "Here are some reference cases:",
    "SQL:SELECT list_id FROM lists_users WHERE user_id = 85981819 ORDER BY "
    "list_creation_date_utc ASC LIMIT 1",
    "question:What is the list ID that was first created by user 85981819?",
    "SQL:SELECT COUNT(T2.user_id) FROM movies AS T1 INNER JOIN ratings AS T2 ON "
    "T1.movie_id = T2.movie_id WHERE T1.movie_title = 'Pavee Lackeen: The Traveller "
    "Girl' AND T2.rating_score = 4",
    'question:How many users gave "Pavee Lackeen: The Traveller Girl" movie a rating '
    "score of 4?",
    "Please answer strictly in the following format and do not change the format arbitrarily:",
    "question:This is a problem description.",
    "</Instruction>",
)


def render_sql2text(sql: str, evidence: str | None = None) -> RenderedPrompt:
    """Ask for the natural-language question a SQL statement answers."""
    if not sql:
        raise ValueError("sql2text requires a SQL statement")
    lines = list(_SQL2TEXT_HEADER)
    lines.append(f"<SQL>{sql}</SQL>")
    if evidence:
        lines.append(f"<Evidence>{evidence}</Evidence>")
    return RenderedPrompt(
        text="\n".join(lines), spec="sql2text", expected_answer_mode=QUESTION_TEXT
    )


_CONSISTENCY_INSTRUCTION = (
    "<Instruction>Determine whether the following two sentences ask the same question "
    "and whether their corresponding answers are the same.</Instruction>"
)


def render_consistency(sentence1: str, sentence2: str) -> RenderedPrompt:
    lines = [
        _CONSISTENCY_INSTRUCTION,
        f"<sentence1>{sentence1}</sentence1>",
        f"<sentence2>{sentence2}</sentence2>",
        "<Question>Just output True or False, do not output anything else</Question>",
    ]
    return RenderedPrompt(
        text="\n".join(lines), spec="consistency", expected_answer_mode=TRUE_FALSE
    )


# ---------------------------------------------------------------------------
# Schema linking
# ---------------------------------------------------------------------------

_LINKING_PREAMBLE = "Given the database schema and question, perform the following actions:"

_ZERO_SHOT_STEPS = (
    "1 - Rank all the tables based on the possibility of being used in the SQL "
    "according to the question from the most relevant to the least relevant, Table or "
    "its column that matches more with the question words is highly relevant and must "
    "be placed ahead.",
    "2 - Check whether you consider all the tables.",
    "3 - Output a list object in the order of step 2, Your output should contain all "
    "the tables. The format should be like:",
    "[",
    '    "table_1", "table_2", ...',
    "]",
)

_FEW_SHOT_STEPS = (
    "1 - Evaluate the importance of each table **in relation to the SQL query**, "
    "prioritizing tables and columns that closely match the question words. Rank the "
    "tables from the most crucial to the least crucial.",
    "2 - Focus on identifying and listing only the most important tables based on the "
    "evaluation in step 1.",
    "3 - Output a list object representing the order determined in step 2. The output "
    "should include **the most important tables** and follow this format:",
    "[",
    '    "most_important_table_1", "most_important_table_2", ...',
    "]",
)

# worked examples shown to the model for few-shot linking; the column lists
# are abbreviated exactly as given
_FEW_SHOT_EXEMPLARS = (
    "Schema:",
    "# department(Department_ID,Name,Creation, ...)",
    "# head(head_ID,name,born_state,age)",
    "# management(department_ID,head_ID,temporary_acting)",
    "Foreign key:",
    "management(department_ID) REFERENCES department(Department_ID)",
    "management(head_ID) REFERENCES head(head_ID)",
    "Question: what are the distinct creation years of the departments managed by a "
    "secretary born in state 'Alabama'?",
    'Answer: ["department","management","head"]',
    "",
    "Schema:",
    "# Country(id,name)",
    "# League(id,country_id,name)",
    "# Player(id,player_api_id,player_name,player_fifa_api_id,birthday,height,weight)",
    "# Player_Attributes(id,player_fifa_api_id, ...)",
    "# Team(id,team_api_id,team_fifa_api_id,team_long_name,team_short_name)",
    "# Team_Attributes(id,team_fifa_api_id, ...)",
    "# sqlite_sequence(name,seq)",
    "Foreign key:",
    "Player_Attributes(player_api_id) REFERENCES Player(player_api_id)",
    "League(country_id) REFERENCES country(id)",
    "Team_Attributes(team_api_id) REFERENCES Team(team_api_id)",
    "Match(away_player_11) REFERENCES Player(player_api_id)",
    "Question: List the names of all left-footed players who have overall rating "
    "between 85 and 90.",
    'Answer: ["Player","Player_Attributes"]',
)


def render_linking(
    catalog: DatabaseCatalog,
    question: str,
    method: str = ZERO_SHOT,
    with_fk: bool = False,
) -> RenderedPrompt:
    """Build a table-retrieval prompt, zero-shot or with worked examples."""
    if method == ZERO_SHOT:
        lines = [_LINKING_PREAMBLE, *_ZERO_SHOT_STEPS, ""]
        closing = "Answer(Only output the list object containing all tables, do not output other content):"
    elif method == FEW_SHOT:
        lines = [_LINKING_PREAMBLE, *_FEW_SHOT_STEPS, "", *_FEW_SHOT_EXEMPLARS, ""]
        closing = "Answer:"
    else:
        raise ConfigError(f"unknown linking method {method!r}")
    lines.append("Database schemas with their properties:")
    lines.extend(_linking_schema(catalog, with_fk))
    lines.append("")
    lines.append(f"Question: {question}")
    lines.append(closing)
    return RenderedPrompt(
        text="\n".join(lines),
        spec=f"linking:{method}",
        expected_answer_mode=BRACKETED_TABLE_LIST,
    )


# ---------------------------------------------------------------------------
# Error classification
# ---------------------------------------------------------------------------

_CLASSIFICATION_HEADER = (
    "You are an expert in SQL queries. Please provide the error categories for "
    "incorrect SQL queries based on the Question and the correct SQL query.",
    "Please think step by step and check for the following errors in order:",
    "1. Condition Filter Error: Incorrect filtering of conditions.",
    "2. Data Processing Error:The condition is filtered correctly, but the data "
    "processing is wrong. Note that the premise of this error is that the conditional "
    "filtering is correct.",
    "",
)


def render_error_classification(question: str, gold_sql: str, wrong_sql: str) -> RenderedPrompt:
    """Build the binary condition-filter vs data-processing prompt."""
    if not wrong_sql:
        raise ValueError("classification requires the wrong SQL")
    if not gold_sql:
        raise ValueError("classification requires the correct SQL")
    lines = list(_CLASSIFICATION_HEADER)
    lines.append(f"Question: {question}")
    lines.append(f"Correct SQL Query: {gold_sql}")
    lines.append(f"Wrong SQL Query: {wrong_sql}")
    lines.append("")
    lines.append("Give your Thought and Answer based on the information above.")
    return RenderedPrompt(
        text="\n".join(lines),
        spec="error_classification",
        expected_answer_mode=ERROR_CATEGORY,
    )
