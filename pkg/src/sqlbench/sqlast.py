"""Tokenizer and recursive-descent parser for the SQLite SELECT dialect.

Covers the query shapes found in the public Text-to-SQL benchmarks:
joins (explicit and comma-style), subqueries in FROM and expressions,
CTEs, set operations, CASE/CAST/EXISTS, aggregate and window calls.
DML/DDL statements are deliberately not parsed; the executor rejects
them up front.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SqlParseError

# ---------------------------------------------------------------------------
# Tokens
# ---------------------------------------------------------------------------

NAME = "NAME"
QNAME = "QNAME"  # quoted identifier ("x", `x`, [x])
STRING = "STRING"
NUMBER = "NUMBER"
OP = "OP"
LPAREN = "LPAREN"
RPAREN = "RPAREN"
COMMA = "COMMA"
DOT = "DOT"
SEMI = "SEMI"
EOF = "EOF"


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int
    quote: str | None = None  # '"', '`' or '[' for QNAME


_MULTI_OPS = ("||", "<<", ">>", "<=", ">=", "==", "!=", "<>")
_SINGLE_OPS = set("<>=+-*/%&|~")
_PUNCT = {"(": LPAREN, ")": RPAREN, ",": COMMA, ".": DOT, ";": SEMI}


def tokenize(sql: str) -> list[Token]:
    """Split SQL text into tokens; raises SqlParseError on stray characters."""
    tokens: list[Token] = []
    i, n = 0, len(sql)
    while i < n:
        ch = sql[i]
        if ch.isspace():
            i += 1
            continue
        if sql.startswith("--", i):
            nl = sql.find("\n", i)
            i = n if nl < 0 else nl + 1
            continue
        if sql.startswith("/*", i):
            end = sql.find("*/", i + 2)
            if end < 0:
                raise SqlParseError("unterminated block comment", i)
            i = end + 2
            continue
        if ch == "'":
            text, i = _scan_quoted(sql, i, "'")
            tokens.append(Token(STRING, text, i))
            continue
        if ch == '"':
            text, i = _scan_quoted(sql, i, '"')
            tokens.append(Token(QNAME, text, i, quote='"'))
            continue
        if ch == "`":
            text, i = _scan_quoted(sql, i, "`")
            tokens.append(Token(QNAME, text, i, quote="`"))
            continue
        if ch == "[":
            end = sql.find("]", i + 1)
            if end < 0:
                raise SqlParseError("unterminated [identifier]", i)
            tokens.append(Token(QNAME, sql[i + 1 : end], i, quote="["))
            i = end + 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and sql[i + 1].isdigit()):
            start = i
            i = _scan_number(sql, i)
            tokens.append(Token(NUMBER, sql[start:i], start))
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (sql[i].isalnum() or sql[i] in "_$"):
                i += 1
            tokens.append(Token(NAME, sql[start:i], start))
            continue
        matched = False
        for op in _MULTI_OPS:
            if sql.startswith(op, i):
                tokens.append(Token(OP, op, i))
                i += len(op)
                matched = True
                break
        if matched:
            continue
        if ch in _PUNCT:
            tokens.append(Token(_PUNCT[ch], ch, i))
            i += 1
            continue
        if ch in _SINGLE_OPS:
            tokens.append(Token(OP, ch, i))
            i += 1
            continue
        raise SqlParseError(f"unexpected character {ch!r}", i)
    tokens.append(Token(EOF, "", n))
    return tokens


def _scan_quoted(sql: str, start: int, quote: str) -> tuple[str, int]:
    # doubled quote chars escape themselves, per SQLite
    i = start + 1
    parts: list[str] = []
    n = len(sql)
    while i < n:
        ch = sql[i]
        if ch == quote:
            if i + 1 < n and sql[i + 1] == quote:
                parts.append(quote)
                i += 2
                continue
            return "".join(parts), i + 1
        parts.append(ch)
        i += 1
    raise SqlParseError(f"unterminated {quote}...{quote} literal", start)


def _scan_number(sql: str, i: int) -> int:
    n = len(sql)
    if sql.startswith(("0x", "0X"), i):
        i += 2
        while i < n and sql[i] in "0123456789abcdefABCDEF":
            i += 1
        return i
    while i < n and sql[i].isdigit():
        i += 1
    if i < n and sql[i] == ".":
        i += 1
        while i < n and sql[i].isdigit():
            i += 1
    if i < n and sql[i] in "eE":
        j = i + 1
        if j < n and sql[j] in "+-":
            j += 1
        if j < n and sql[j].isdigit():
            i = j
            while i < n and sql[i].isdigit():
                i += 1
    return i


# ---------------------------------------------------------------------------
# AST nodes
# ---------------------------------------------------------------------------


class Node:
    """Marker base class for AST values."""


@dataclass
class Literal(Node):
    value: str
    kind: str  # 'string' | 'number' | 'null' | 'bool' | 'current'


@dataclass
class ColumnRef(Node):
    table: str | None
    name: str
    # '"' when the bare name came from a double-quoted token; such atoms may
    # actually be string literals in SQLite and are resolved leniently
    quote: str | None = None


@dataclass
class Star(Node):
    table: str | None = None


@dataclass
class FuncCall(Node):
    name: str
    args: list[Node] = field(default_factory=list)
    distinct: bool = False
    star: bool = False
    over: list[Node] = field(default_factory=list)  # window partition/order exprs


@dataclass
class Unary(Node):
    op: str
    operand: Node


@dataclass
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass
class InExpr(Node):
    operand: Node
    items: list[Node] | None
    query: Node | None
    negated: bool


@dataclass
class Between(Node):
    operand: Node
    low: Node
    high: Node
    negated: bool


@dataclass
class CaseExpr(Node):
    operand: Node | None
    whens: list[tuple[Node, Node]]
    default: Node | None


@dataclass
class Cast(Node):
    operand: Node
    type_name: str


@dataclass
class Exists(Node):
    query: Node


@dataclass
class Subquery(Node):
    query: Node


@dataclass
class TupleExpr(Node):
    items: list[Node]


@dataclass
class Collate(Node):
    operand: Node
    collation: str


@dataclass
class ResultColumn(Node):
    expr: Node  # expression or Star
    alias: str | None = None


@dataclass
class TableRef(Node):
    name: str
    alias: str | None = None
    schema: str | None = None


@dataclass
class SubqueryRef(Node):
    query: Node
    alias: str | None = None


@dataclass
class FromItem(Node):
    source: Node  # TableRef | SubqueryRef | FromGroup
    join_op: str | None = None  # None for the first item, else ',' or 'JOIN' etc.
    on: Node | None = None
    using: list[str] | None = None


@dataclass
class FromGroup(Node):
    items: list[FromItem]


@dataclass
class OrderTerm(Node):
    expr: Node
    direction: str | None = None


@dataclass
class Select(Node):
    columns: list[ResultColumn]
    distinct: bool = False
    from_items: list[FromItem] = field(default_factory=list)
    where: Node | None = None
    group_by: list[Node] = field(default_factory=list)
    having: Node | None = None
    order_by: list[OrderTerm] = field(default_factory=list)
    limit: Node | None = None
    offset: Node | None = None


@dataclass
class SetOp(Node):
    op: str  # 'UNION' | 'UNION ALL' | 'INTERSECT' | 'EXCEPT'
    left: Node
    right: Node
    order_by: list[OrderTerm] = field(default_factory=list)
    limit: Node | None = None
    offset: Node | None = None


@dataclass
class Cte(Node):
    name: str
    columns: list[str]
    query: Node


@dataclass
class WithQuery(Node):
    ctes: list[Cte]
    body: Node
    recursive: bool = False


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

# words that terminate an implicit (AS-less) alias
_ALIAS_STOPWORDS = {
    "FROM", "WHERE", "GROUP", "ORDER", "HAVING", "LIMIT", "OFFSET", "UNION",
    "INTERSECT", "EXCEPT", "JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS",
    "NATURAL", "ON", "USING", "AS", "AND", "OR", "NOT", "WHEN", "THEN",
    "ELSE", "END", "ASC", "DESC", "COLLATE", "IS", "IN", "LIKE", "GLOB",
    "BETWEEN", "SELECT", "SET", "WINDOW", "RETURNING", "ESCAPE", "MATCH",
    "REGEXP", "ISNULL", "NOTNULL",
}

_CURRENT_CONSTANTS = {"CURRENT_TIME", "CURRENT_DATE", "CURRENT_TIMESTAMP"}

_JOIN_INTRO = {"JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS", "NATURAL"}


class _Parser:
    def __init__(self, sql: str):
        self.sql = sql
        self.tokens = tokenize(sql)
        self.i = 0

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        j = min(self.i + ahead, len(self.tokens) - 1)
        return self.tokens[j]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != EOF:
            self.i += 1
        return tok

    def error(self, message: str) -> SqlParseError:
        tok = self.peek()
        shown = tok.text if tok.kind != EOF else "end of input"
        return SqlParseError(f"{message}, found {shown!r}", tok.pos)

    def at_kw(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == NAME and tok.text.upper() in words

    def match_kw(self, *words: str) -> bool:
        if self.at_kw(*words):
            self.advance()
            return True
        return False

    def expect_kw(self, word: str) -> None:
        if not self.match_kw(word):
            raise self.error(f"expected {word}")

    def expect(self, kind: str) -> Token:
        if self.peek().kind != kind:
            raise self.error(f"expected {kind}")
        return self.advance()

    # -- entry points -------------------------------------------------------

    def parse_statement(self) -> Node:
        stmt = self.parse_select_statement()
        if self.peek().kind == SEMI:
            self.advance()
        if self.peek().kind != EOF:
            raise self.error("unexpected trailing input")
        return stmt

    def parse_select_statement(self) -> Node:
        if self.at_kw("WITH"):
            return self.parse_with()
        return self.parse_compound()

    def parse_with(self) -> Node:
        self.expect_kw("WITH")
        recursive = self.match_kw("RECURSIVE")
        ctes: list[Cte] = []
        while True:
            name = self.parse_identifier("CTE name")
            cols: list[str] = []
            if self.peek().kind == LPAREN:
                self.advance()
                while True:
                    cols.append(self.parse_identifier("CTE column"))
                    if self.peek().kind == COMMA:
                        self.advance()
                        continue
                    break
                self.expect(RPAREN)
            self.expect_kw("AS")
            self.expect(LPAREN)
            query = self.parse_select_statement()
            self.expect(RPAREN)
            ctes.append(Cte(name, cols, query))
            if self.peek().kind == COMMA:
                self.advance()
                continue
            break
        body = self.parse_compound()
        return WithQuery(ctes, body, recursive)

    def parse_compound(self) -> Node:
        node: Node = self.parse_select_core()
        while True:
            if self.at_kw("UNION"):
                self.advance()
                op = "UNION ALL" if self.match_kw("ALL") else "UNION"
            elif self.at_kw("INTERSECT"):
                self.advance()
                op = "INTERSECT"
            elif self.at_kw("EXCEPT"):
                self.advance()
                op = "EXCEPT"
            else:
                break
            right = self.parse_select_core()
            node = SetOp(op, node, right)
        order_by = self.parse_order_by_opt()
        limit, offset = self.parse_limit_opt()
        if order_by or limit is not None:
            if isinstance(node, (Select, SetOp)):
                node.order_by = order_by
                node.limit = limit
                node.offset = offset
        return node

    def parse_select_core(self) -> Select:
        if self.peek().kind == LPAREN and self._paren_starts_select():
            # parenthesized select used as an operand of a set operation
            self.advance()
            inner = self.parse_select_statement()
            self.expect(RPAREN)
            if isinstance(inner, Select):
                return inner
            raise self.error("unsupported parenthesized compound here")
        self.expect_kw("SELECT")
        distinct = False
        if self.match_kw("DISTINCT"):
            distinct = True
        else:
            self.match_kw("ALL")
        columns = [self.parse_result_column()]
        while self.peek().kind == COMMA:
            self.advance()
            columns.append(self.parse_result_column())
        from_items: list[FromItem] = []
        if self.match_kw("FROM"):
            from_items = self.parse_from_items()
        where = self.parse_expr() if self.match_kw("WHERE") else None
        group_by: list[Node] = []
        if self.match_kw("GROUP"):
            self.expect_kw("BY")
            group_by.append(self.parse_expr())
            while self.peek().kind == COMMA:
                self.advance()
                group_by.append(self.parse_expr())
        having = self.parse_expr() if self.match_kw("HAVING") else None
        return Select(
            columns=columns,
            distinct=distinct,
            from_items=from_items,
            where=where,
            group_by=group_by,
            having=having,
        )

    def parse_result_column(self) -> ResultColumn:
        tok = self.peek()
        if tok.kind == OP and tok.text == "*":
            self.advance()
            return ResultColumn(Star())
        if (
            tok.kind in (NAME, QNAME)
            and self.peek(1).kind == DOT
            and self.peek(2).kind == OP
            and self.peek(2).text == "*"
        ):
            self.advance()
            self.advance()
            self.advance()
            return ResultColumn(Star(tok.text))
        expr = self.parse_expr()
        alias = self.parse_alias_opt()
        return ResultColumn(expr, alias)

    def parse_alias_opt(self) -> str | None:
        if self.match_kw("AS"):
            tok = self.peek()
            if tok.kind in (NAME, QNAME, STRING):
                return self.advance().text
            raise self.error("expected alias after AS")
        tok = self.peek()
        if tok.kind == QNAME:
            return self.advance().text
        if tok.kind == NAME and tok.text.upper() not in _ALIAS_STOPWORDS:
            return self.advance().text
        return None

    # -- FROM clause --------------------------------------------------------

    def parse_from_items(self) -> list[FromItem]:
        items = [FromItem(self.parse_table_or_subquery())]
        while True:
            tok = self.peek()
            if tok.kind == COMMA:
                self.advance()
                items.append(FromItem(self.parse_table_or_subquery(), join_op=","))
                continue
            if tok.kind == NAME and tok.text.upper() in _JOIN_INTRO:
                join_op = self.parse_join_op()
                source = self.parse_table_or_subquery()
                on = None
                using = None
                if self.match_kw("ON"):
                    on = self.parse_expr()
                elif self.match_kw("USING"):
                    self.expect(LPAREN)
                    using = [self.parse_identifier("USING column")]
                    while self.peek().kind == COMMA:
                        self.advance()
                        using.append(self.parse_identifier("USING column"))
                    self.expect(RPAREN)
                items.append(FromItem(source, join_op=join_op, on=on, using=using))
                continue
            break
        return items

    def parse_join_op(self) -> str:
        parts: list[str] = []
        if self.match_kw("NATURAL"):
            parts.append("NATURAL")
        for kw in ("INNER", "CROSS", "LEFT", "RIGHT", "FULL"):
            if self.match_kw(kw):
                parts.append(kw)
                if kw in ("LEFT", "RIGHT", "FULL"):
                    if self.match_kw("OUTER"):
                        parts.append("OUTER")
                break
        self.expect_kw("JOIN")
        parts.append("JOIN")
        return " ".join(parts)

    def parse_table_or_subquery(self) -> Node:
        if self.peek().kind == LPAREN:
            if self._paren_starts_select():
                self.advance()
                query = self.parse_select_statement()
                self.expect(RPAREN)
                alias = self.parse_alias_opt()
                return SubqueryRef(query, alias)
            self.advance()
            inner = self.parse_from_items()
            self.expect(RPAREN)
            return FromGroup(inner)
        name = self.parse_identifier("table name")
        schema = None
        if self.peek().kind == DOT:
            self.advance()
            schema, name = name, self.parse_identifier("table name")
        alias = self.parse_alias_opt()
        return TableRef(name, alias, schema)

    def _paren_starts_select(self) -> bool:
        # lookahead past nested parens for SELECT / WITH / VALUES
        j = self.i
        depth = 0
        while j < len(self.tokens):
            tok = self.tokens[j]
            if tok.kind == LPAREN:
                depth += 1
                j += 1
                continue
            if depth == 0:
                return False
            return tok.kind == NAME and tok.text.upper() in ("SELECT", "WITH", "VALUES")
        return False

    def parse_identifier(self, what: str) -> str:
        tok = self.peek()
        if tok.kind in (NAME, QNAME):
            return self.advance().text
        raise self.error(f"expected {what}")

    def parse_order_by_opt(self) -> list[OrderTerm]:
        if not self.at_kw("ORDER"):
            return []
        self.advance()
        self.expect_kw("BY")
        terms = [self.parse_order_term()]
        while self.peek().kind == COMMA:
            self.advance()
            terms.append(self.parse_order_term())
        return terms

    def parse_order_term(self) -> OrderTerm:
        expr = self.parse_expr()
        direction = None
        if self.match_kw("ASC"):
            direction = "ASC"
        elif self.match_kw("DESC"):
            direction = "DESC"
        if self.match_kw("NULLS"):
            if not (self.match_kw("FIRST") or self.match_kw("LAST")):
                raise self.error("expected FIRST or LAST")
        return OrderTerm(expr, direction)

    def parse_limit_opt(self) -> tuple[Node | None, Node | None]:
        if not self.match_kw("LIMIT"):
            return None, None
        first = self.parse_expr()
        if self.match_kw("OFFSET"):
            return first, self.parse_expr()
        if self.peek().kind == COMMA:
            # LIMIT offset, count
            self.advance()
            count = self.parse_expr()
            return count, first
        return first, None

    # -- expressions --------------------------------------------------------

    def parse_expr(self) -> Node:
        return self.parse_or()

    def parse_or(self) -> Node:
        node = self.parse_and()
        while self.at_kw("OR"):
            self.advance()
            node = Binary("OR", node, self.parse_and())
        return node

    def parse_and(self) -> Node:
        node = self.parse_not()
        while self.at_kw("AND"):
            self.advance()
            node = Binary("AND", node, self.parse_not())
        return node

    def parse_not(self) -> Node:
        if self.at_kw("NOT") and not self._not_is_postfix_intro():
            self.advance()
            return Unary("NOT", self.parse_not())
        return self.parse_comparison()

    def _not_is_postfix_intro(self) -> bool:
        nxt = self.peek(1)
        return nxt.kind == NAME and nxt.text.upper() in ("IN", "LIKE", "GLOB", "BETWEEN", "NULL")

    def parse_comparison(self) -> Node:
        node = self.parse_relational()
        while True:
            tok = self.peek()
            if tok.kind == OP and tok.text in ("=", "==", "!=", "<>"):
                self.advance()
                op = "=" if tok.text in ("=", "==") else "!="
                node = Binary(op, node, self.parse_relational())
                continue
            if self.at_kw("IS"):
                self.advance()
                negated = self.match_kw("NOT")
                if self.match_kw("NULL"):
                    right: Node = Literal("NULL", "null")
                else:
                    right = self.parse_relational()
                node = Binary("IS NOT" if negated else "IS", node, right)
                continue
            if self.at_kw("ISNULL"):
                self.advance()
                node = Binary("IS", node, Literal("NULL", "null"))
                continue
            if self.at_kw("NOTNULL"):
                self.advance()
                node = Binary("IS NOT", node, Literal("NULL", "null"))
                continue
            negated = False
            if self.at_kw("NOT"):
                if not self._not_is_postfix_intro():
                    break
                self.advance()
                negated = True
            if self.match_kw("IN"):
                node = self.parse_in_tail(node, negated)
                continue
            if self.at_kw("LIKE", "GLOB", "MATCH", "REGEXP"):
                op = self.advance().text.upper()
                pattern = self.parse_relational()
                if self.match_kw("ESCAPE"):
                    self.parse_relational()
                node = Binary(("NOT " if negated else "") + op, node, pattern)
                continue
            if self.match_kw("BETWEEN"):
                low = self.parse_relational()
                self.expect_kw("AND")
                high = self.parse_relational()
                node = Between(node, low, high, negated)
                continue
            if negated:
                raise self.error("expected IN, LIKE, GLOB or BETWEEN after NOT")
            break
        return node

    def parse_in_tail(self, operand: Node, negated: bool) -> Node:
        self.expect(LPAREN)
        if self.at_kw("SELECT", "WITH"):
            query = self.parse_select_statement()
            self.expect(RPAREN)
            return InExpr(operand, None, query, negated)
        items = [self.parse_expr()]
        while self.peek().kind == COMMA:
            self.advance()
            items.append(self.parse_expr())
        self.expect(RPAREN)
        return InExpr(operand, items, None, negated)

    def parse_relational(self) -> Node:
        node = self.parse_bitwise()
        while True:
            tok = self.peek()
            if tok.kind == OP and tok.text in ("<", "<=", ">", ">="):
                self.advance()
                node = Binary(tok.text, node, self.parse_bitwise())
                continue
            break
        return node

    def parse_bitwise(self) -> Node:
        node = self.parse_additive()
        while True:
            tok = self.peek()
            if tok.kind == OP and tok.text in ("&", "|", "<<", ">>"):
                self.advance()
                node = Binary(tok.text, node, self.parse_additive())
                continue
            break
        return node

    def parse_additive(self) -> Node:
        node = self.parse_multiplicative()
        while True:
            tok = self.peek()
            if tok.kind == OP and tok.text in ("+", "-"):
                self.advance()
                node = Binary(tok.text, node, self.parse_multiplicative())
                continue
            break
        return node

    def parse_multiplicative(self) -> Node:
        node = self.parse_concat()
        while True:
            tok = self.peek()
            if tok.kind == OP and tok.text in ("*", "/", "%"):
                self.advance()
                node = Binary(tok.text, node, self.parse_concat())
                continue
            break
        return node

    def parse_concat(self) -> Node:
        node = self.parse_unary()
        while self.peek().kind == OP and self.peek().text == "||":
            self.advance()
            node = Binary("||", node, self.parse_unary())
        return node

    def parse_unary(self) -> Node:
        tok = self.peek()
        if tok.kind == OP and tok.text in ("-", "+", "~"):
            self.advance()
            return Unary(tok.text, self.parse_unary())
        return self.parse_postfix()

    def parse_postfix(self) -> Node:
        node = self.parse_primary()
        while self.match_kw("COLLATE"):
            node = Collate(node, self.parse_identifier("collation name"))
        return node

    def parse_primary(self) -> Node:
        tok = self.peek()
        if tok.kind == LPAREN:
            if self._paren_starts_select():
                self.advance()
                query = self.parse_select_statement()
                self.expect(RPAREN)
                return Subquery(query)
            self.advance()
            items = [self.parse_expr()]
            while self.peek().kind == COMMA:
                self.advance()
                items.append(self.parse_expr())
            self.expect(RPAREN)
            return items[0] if len(items) == 1 else TupleExpr(items)
        if tok.kind == STRING:
            self.advance()
            return Literal(tok.text, "string")
        if tok.kind == NUMBER:
            self.advance()
            return Literal(tok.text, "number")
        if tok.kind == NAME:
            upper = tok.text.upper()
            if upper == "NULL":
                self.advance()
                return Literal("NULL", "null")
            if upper in ("TRUE", "FALSE") and self.peek(1).kind != DOT:
                self.advance()
                return Literal(upper, "bool")
            if upper in _CURRENT_CONSTANTS:
                self.advance()
                return Literal(upper, "current")
            if upper == "CASE":
                return self.parse_case()
            if upper == "CAST":
                return self.parse_cast()
            if upper == "EXISTS":
                self.advance()
                self.expect(LPAREN)
                query = self.parse_select_statement()
                self.expect(RPAREN)
                return Exists(query)
            if self.peek(1).kind == LPAREN:
                return self.parse_func_call()
        if tok.kind in (NAME, QNAME):
            return self.parse_column_ref()
        raise self.error("expected expression")

    def parse_case(self) -> Node:
        self.expect_kw("CASE")
        operand = None
        if not self.at_kw("WHEN"):
            operand = self.parse_expr()
        whens: list[tuple[Node, Node]] = []
        while self.match_kw("WHEN"):
            cond = self.parse_expr()
            self.expect_kw("THEN")
            whens.append((cond, self.parse_expr()))
        default = self.parse_expr() if self.match_kw("ELSE") else None
        self.expect_kw("END")
        if not whens:
            raise self.error("CASE requires at least one WHEN")
        return CaseExpr(operand, whens, default)

    def parse_cast(self) -> Node:
        self.expect_kw("CAST")
        self.expect(LPAREN)
        operand = self.parse_expr()
        self.expect_kw("AS")
        parts = [self.parse_identifier("type name")]
        while self.peek().kind == NAME and not self.at_kw("AS"):
            if self.peek().kind == RPAREN:
                break
            parts.append(self.advance().text)
        if self.peek().kind == LPAREN:
            self.advance()
            while self.peek().kind != RPAREN:
                self.advance()
            self.expect(RPAREN)
        self.expect(RPAREN)
        return Cast(operand, " ".join(parts))

    def parse_func_call(self) -> Node:
        name = self.advance().text
        self.expect(LPAREN)
        call = FuncCall(name)
        if self.peek().kind == RPAREN:
            self.advance()
        else:
            if self.peek().kind == OP and self.peek().text == "*":
                self.advance()
                call.star = True
            else:
                call.distinct = self.match_kw("DISTINCT")
                call.args.append(self.parse_expr())
                while self.peek().kind == COMMA:
                    self.advance()
                    call.args.append(self.parse_expr())
            self.expect(RPAREN)
        if self.match_kw("FILTER"):
            self.expect(LPAREN)
            self.expect_kw("WHERE")
            call.args.append(self.parse_expr())
            self.expect(RPAREN)
        if self.match_kw("OVER"):
            if self.peek().kind == LPAREN:
                self.advance()
                if self.match_kw("PARTITION"):
                    self.expect_kw("BY")
                    call.over.append(self.parse_expr())
                    while self.peek().kind == COMMA:
                        self.advance()
                        call.over.append(self.parse_expr())
                for term in self.parse_order_by_opt():
                    call.over.append(term.expr)
                # skim any frame specification
                depth = 0
                while not (self.peek().kind == RPAREN and depth == 0):
                    t = self.advance()
                    if t.kind == EOF:
                        raise self.error("unterminated OVER clause")
                    if t.kind == LPAREN:
                        depth += 1
                    elif t.kind == RPAREN:
                        depth -= 1
                self.expect(RPAREN)
            else:
                self.parse_identifier("window name")
        return call

    def parse_column_ref(self) -> Node:
        first = self.advance()
        if self.peek().kind == DOT:
            self.advance()
            second = self.peek()
            if second.kind not in (NAME, QNAME):
                raise self.error("expected column name after '.'")
            self.advance()
            if self.peek().kind == DOT:
                # db.table.column: drop the database qualifier
                self.advance()
                third = self.peek()
                if third.kind not in (NAME, QNAME):
                    raise self.error("expected column name after '.'")
                self.advance()
                return ColumnRef(second.text, third.text, third.quote)
            return ColumnRef(first.text, second.text, second.quote)
        return ColumnRef(None, first.text, first.quote)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def parse_sql(sql: str) -> Node:
    """Parse a SELECT statement (optionally WITH/compound) into an AST.

    Raises SqlParseError with a character offset when the text is not a
    supported query.
    """
    if not sql or not sql.strip():
        raise SqlParseError("empty SQL text", 0)
    return _Parser(sql).parse_statement()


def statement_kind(sql: str) -> str:
    """First keyword of the statement, uppercased ('' when unscannable)."""
    try:
        tokens = tokenize(sql)
    except SqlParseError:
        # scan errors later in the text must not hide a leading write keyword
        head = sql.lstrip()[:32].split()
        return head[0].upper() if head else ""
    for tok in tokens:
        if tok.kind == NAME:
            return tok.text.upper()
        if tok.kind in (EOF,):
            break
        if tok.kind not in (SEMI,):
            break
    return ""


def has_top_level_order_by(sql_or_node: str | Node) -> bool:
    """True when the outermost statement carries an ORDER BY clause."""
    node = parse_sql(sql_or_node) if isinstance(sql_or_node, str) else sql_or_node
    if isinstance(node, WithQuery):
        node = node.body
    if isinstance(node, (Select, SetOp)):
        return bool(node.order_by)
    return False


def iter_nodes(node: Node):
    """Yield node and all AST descendants, depth first."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(_children(current))


def _children(node: Node) -> list[Node]:
    out: list[Node] = []

    def add(value):
        if isinstance(value, Node):
            out.append(value)
        elif isinstance(value, (list, tuple)):
            for item in value:
                add(item)

    for attr in vars(node).values():
        add(attr)
    return out
