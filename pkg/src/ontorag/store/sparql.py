"""Parser for the SPARQL subset the pipeline needs.

Supported: SELECT / ASK, PREFIX declarations, GRAPH-scoped basic graph
patterns (with ';' and ',' abbreviations), FILTER with '=', CONTAINS and
REGEX, DISTINCT, and LIMIT. Anything else from the full language raises
UnsupportedFeature so callers can tell "outside the subset" apart from
plain syntax errors.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ontorag.errors import OntoragError
from ontorag.store.terms import Iri, Literal, Term

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

_UNSUPPORTED_QUERY_FORMS = {"CONSTRUCT", "DESCRIBE", "INSERT", "DELETE", "LOAD", "CLEAR"}
_UNSUPPORTED_GROUP_KEYWORDS = {
    "OPTIONAL", "UNION", "MINUS", "SERVICE", "BIND", "VALUES", "EXISTS", "NOT",
}
_UNSUPPORTED_MODIFIERS = {"ORDER", "GROUP", "HAVING", "OFFSET"}


class SparqlSyntax(OntoragError):
    def __init__(self, position: int, message: str):
        self.position = position
        self.message = message
        super().__init__(f"at offset {position}: {message}")


class UnsupportedFeature(OntoragError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unsupported SPARQL feature: {name}")


@dataclass(frozen=True)
class Var:
    name: str


@dataclass
class TriplePattern:
    s: Term | Var
    p: Term | Var
    o: Term | Var

    def parts(self):
        return (self.s, self.p, self.o)


@dataclass
class PatternGroup:
    """Triple patterns under one graph scope: a constant graph IRI, a graph
    variable, or None for the union of all named graphs."""

    graph: Iri | Var | None
    triples: list[TriplePattern] = field(default_factory=list)


@dataclass
class FilterExpr:
    kind: str  # "eq" | "contains" | "regex"
    lhs: Term | Var
    rhs: Term | Var
    flags: str = ""


@dataclass
class QueryAst:
    form: str  # "SELECT" | "ASK"
    projection: list[str] | None  # None means SELECT *
    groups: list[PatternGroup]
    filters: list[FilterExpr]
    distinct: bool = False
    limit: int | None = None

    def variables(self) -> list[str]:
        """Pattern variables in first-occurrence order (graph vars included)."""
        seen: list[str] = []
        for group in self.groups:
            if isinstance(group.graph, Var) and group.graph.name not in seen:
                seen.append(group.graph.name)
            for tp in group.triples:
                for part in tp.parts():
                    if isinstance(part, Var) and part.name not in seen:
                        seen.append(part.name)
        return seen


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>\s]*>)
  | (?P<var>[?$][A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
  | (?P<number>[0-9]+(?:\.[0-9]+)?)
  | (?P<pname>[A-Za-z_][A-Za-z0-9_\-]*:[A-Za-z0-9_\-.]*)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>\{|\}|\(|\)|\.|;|,|\*|=|!=|<=|>=|<|>)
    """,
    re.VERBOSE,
)

_STRING_UNESCAPES = {
    "n": "\n", "t": "\t", "r": "\r", '"': '"', "'": "'", "\\": "\\",
}


@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise SparqlSyntax(pos, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup or ""
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    return tokens


def _unquote(raw: str) -> str:
    body = raw[1:-1]
    out: list[str] = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(_STRING_UNESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = {}

    # -- token helpers -----------------------------------------------------

    def peek(self) -> _Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise SparqlSyntax(len(self.text), "unexpected end of query")
        self.i += 1
        return tok

    def peek_word(self) -> str | None:
        tok = self.peek()
        if tok and tok.kind == "word":
            return tok.text.upper()
        return None

    def accept_punct(self, text: str) -> bool:
        tok = self.peek()
        if tok and tok.kind == "punct" and tok.text == text:
            self.i += 1
            return True
        return False

    def expect_punct(self, text: str):
        tok = self.peek()
        if not (tok and tok.kind == "punct" and tok.text == text):
            pos = tok.pos if tok else len(self.text)
            raise SparqlSyntax(pos, f"expected {text!r}")
        self.i += 1

    def accept_word(self, word: str) -> bool:
        if self.peek_word() == word:
            self.i += 1
            return True
        return False

    # -- grammar -----------------------------------------------------------

    def parse(self) -> QueryAst:
        self._parse_prologue()
        tok = self.peek()
        if tok is None:
            raise SparqlSyntax(len(self.text), "empty query")
        form = self.peek_word()
        if form in _UNSUPPORTED_QUERY_FORMS:
            raise UnsupportedFeature(form)
        if form == "SELECT":
            ast = self._parse_select()
        elif form == "ASK":
            ast = self._parse_ask()
        else:
            raise SparqlSyntax(tok.pos, "expected SELECT or ASK")
        self._check_bindings(ast)
        return ast

    def _parse_prologue(self):
        while True:
            word = self.peek_word()
            if word == "BASE":
                raise UnsupportedFeature("BASE")
            if word != "PREFIX":
                return
            self.next()
            tok = self.next()
            # the declaration form is the bare prefix: "px:"
            if tok.kind != "pname" or not tok.text.endswith(":"):
                raise SparqlSyntax(tok.pos, "expected prefix name ending in ':'")
            name = tok.text[:-1]
            iri_tok = self.next()
            if iri_tok.kind != "iri":
                raise SparqlSyntax(iri_tok.pos, "expected IRI after prefix name")
            self.prefixes[name] = iri_tok.text[1:-1]

    def _parse_select(self) -> QueryAst:
        self.next()  # SELECT
        distinct = False
        if self.accept_word("DISTINCT"):
            distinct = True
        elif self.peek_word() == "REDUCED":
            raise UnsupportedFeature("REDUCED")
        projection: list[str] | None
        if self.accept_punct("*"):
            projection = None
        else:
            projection = []
            while True:
                tok = self.peek()
                if tok and tok.kind == "var":
                    projection.append(self.next().text[1:])
                elif tok and tok.kind == "punct" and tok.text == "(":
                    raise UnsupportedFeature("SELECT expressions")
                else:
                    break
            if not projection:
                pos = self.peek().pos if self.peek() else len(self.text)
                raise SparqlSyntax(pos, "SELECT needs variables or *")
        groups, filters = self._parse_where()
        limit = self._parse_modifiers()
        return QueryAst("SELECT", projection, groups, filters, distinct, limit)

    def _parse_ask(self) -> QueryAst:
        self.next()  # ASK
        groups, filters = self._parse_where()
        limit = self._parse_modifiers()
        return QueryAst("ASK", None, groups, filters, False, limit)

    def _parse_where(self):
        self.accept_word("WHERE")
        self.expect_punct("{")
        groups: list[PatternGroup] = []
        filters: list[FilterExpr] = []
        default_group = PatternGroup(graph=None)
        while not self.accept_punct("}"):
            word = self.peek_word()
            tok = self.peek()
            if word in _UNSUPPORTED_GROUP_KEYWORDS:
                raise UnsupportedFeature(word)
            if tok and tok.kind == "punct" and tok.text == "{":
                raise UnsupportedFeature("nested group")
            if word == "GRAPH":
                groups.append(self._parse_graph_group(filters))
            elif word == "FILTER":
                self.next()
                filters.append(self._parse_filter())
            else:
                self._parse_triples_into(default_group)
        if default_group.triples:
            groups.insert(0, default_group)
        return groups, filters

    def _parse_graph_group(self, filters: list[FilterExpr]) -> PatternGroup:
        self.next()  # GRAPH
        scope_term = self._parse_term(allow_literal=False)
        assert isinstance(scope_term, (Iri, Var))
        group = PatternGroup(graph=scope_term)
        self.expect_punct("{")
        while not self.accept_punct("}"):
            word = self.peek_word()
            if word in _UNSUPPORTED_GROUP_KEYWORDS:
                raise UnsupportedFeature(word)
            if word == "GRAPH":
                raise UnsupportedFeature("nested GRAPH")
            if word == "FILTER":
                self.next()
                filters.append(self._parse_filter())
            else:
                self._parse_triples_into(group)
        return group

    def _parse_triples_into(self, group: PatternGroup):
        subject = self._parse_term()
        while True:
            predicate = self._parse_term()
            while True:
                obj = self._parse_term()
                group.triples.append(TriplePattern(subject, predicate, obj))
                if not self.accept_punct(","):
                    break
            if not self.accept_punct(";"):
                break
            # allow a trailing ';' before '.' or '}'
            nxt = self.peek()
            if nxt and nxt.kind == "punct" and nxt.text in {".", "}"}:
                break
        self.accept_punct(".")

    def _parse_term(self, allow_literal: bool = True) -> Term | Var:
        tok = self.next()
        if tok.kind == "var":
            return Var(tok.text[1:])
        if tok.kind == "iri":
            return Iri(tok.text[1:-1])
        if tok.kind == "pname":
            name, _, local = tok.text.partition(":")
            if name not in self.prefixes:
                raise SparqlSyntax(tok.pos, f"undeclared prefix {name!r}")
            return Iri(self.prefixes[name] + local)
        if tok.kind == "word" and tok.text == "a":
            return Iri(RDF_TYPE)
        if tok.kind == "string" and allow_literal:
            return Literal(_unquote(tok.text))
        if tok.kind == "number" and allow_literal:
            return Literal(tok.text)
        raise SparqlSyntax(tok.pos, f"unexpected token {tok.text!r}")

    def _parse_filter(self) -> FilterExpr:
        wrapped = self.accept_punct("(")
        word = self.peek_word()
        if word in {"REGEX", "CONTAINS"}:
            expr = self._parse_filter_call(word)
        else:
            lhs = self._parse_term()
            op = self.next()
            if op.kind != "punct" or op.text not in {"=", "!=", "<", ">", "<=", ">="}:
                raise SparqlSyntax(op.pos, "expected comparison operator")
            if op.text != "=":
                raise UnsupportedFeature(f"FILTER operator {op.text}")
            rhs = self._parse_term()
            expr = FilterExpr("eq", lhs, rhs)
        if wrapped:
            self.expect_punct(")")
        return expr

    def _parse_filter_call(self, word: str) -> FilterExpr:
        self.next()  # REGEX | CONTAINS
        self.expect_punct("(")
        lhs = self._parse_str_expr()
        self.expect_punct(",")
        arg = self._parse_term()
        if not isinstance(arg, Literal):
            raise SparqlSyntax(0, f"{word} needs a string argument")
        flags = ""
        if word == "REGEX" and self.accept_punct(","):
            flag_tok = self._parse_term()
            if not isinstance(flag_tok, Literal):
                raise SparqlSyntax(0, "REGEX flags must be a string")
            flags = flag_tok.lexical
        self.expect_punct(")")
        return FilterExpr("regex" if word == "REGEX" else "contains", lhs, arg, flags)

    def _parse_str_expr(self) -> Term | Var:
        if self.peek_word() == "STR":
            self.next()
            self.expect_punct("(")
            inner = self._parse_term()
            self.expect_punct(")")
            return inner
        return self._parse_term()

    def _parse_modifiers(self) -> int | None:
        limit = None
        while True:
            word = self.peek_word()
            if word in _UNSUPPORTED_MODIFIERS:
                raise UnsupportedFeature(word)
            if word == "LIMIT":
                self.next()
                tok = self.next()
                if tok.kind != "number" or "." in tok.text:
                    raise SparqlSyntax(tok.pos, "LIMIT needs a positive integer")
                limit = int(tok.text)
                if limit <= 0:
                    raise SparqlSyntax(tok.pos, "LIMIT must be positive")
                continue
            break
        tok = self.peek()
        if tok is not None:
            raise SparqlSyntax(tok.pos, f"unexpected trailing token {tok.text!r}")
        return limit

    def _check_bindings(self, ast: QueryAst):
        bound = set(ast.variables())
        if ast.projection is not None:
            for name in ast.projection:
                if name not in bound:
                    raise SparqlSyntax(0, f"projected variable ?{name} is unbound")
        for f in ast.filters:
            for side in (f.lhs, f.rhs):
                if isinstance(side, Var) and side.name not in bound:
                    raise SparqlSyntax(0, f"filter variable ?{side.name} is unbound")


def parse_sparql(text: str) -> QueryAst:
    """Parse query text into an AST, expanding PREFIX declarations."""
    return _Parser(text).parse()
