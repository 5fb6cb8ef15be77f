"""N-Triples / N-Quads reading and writing: UTF-8, one statement per line.

Statements with three terms are assigned to a caller-supplied default graph.
Language-tagged literals are outside the supported subset and rejected.
"""

from __future__ import annotations

from ontorag.errors import OntoragError
from ontorag.store.terms import Blank, Iri, Literal, Quad, Term

_ESCAPES = {
    '"': '\\"',
    "\\": "\\\\",
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
}

_UNESCAPES = {
    '"': '"',
    "\\": "\\",
    "n": "\n",
    "r": "\r",
    "t": "\t",
    "b": "\b",
    "f": "\f",
}


class RdfSyntax(OntoragError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        self.message = message
        super().__init__(f"line {line_no}: {message}")


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def _term_str(term: Term) -> str:
    if isinstance(term, Iri):
        return f"<{term.value}>"
    if isinstance(term, Blank):
        return f"_:{term.label}"
    out = f'"{_escape(term.lexical)}"'
    if term.datatype:
        out += f"^^<{term.datatype}>"
    return out


def serialize_quad(quad: Quad) -> str:
    return (
        f"{_term_str(quad.s)} {_term_str(quad.p)} "
        f"{_term_str(quad.o)} {_term_str(quad.g)} ."
    )


def serialize_nquads(quads) -> str:
    """One statement per line; trailing newline when non-empty."""
    lines = [serialize_quad(q) for q in quads]
    return "\n".join(lines) + ("\n" if lines else "")


class _LineParser:
    def __init__(self, line: str, line_no: int):
        self.line = line
        self.pos = 0
        self.line_no = line_no

    def fail(self, message: str):
        raise RdfSyntax(self.line_no, f"{message} (column {self.pos + 1})")

    def skip_ws(self):
        while self.pos < len(self.line) and self.line[self.pos] in " \t":
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.line)

    def read_term(self) -> Term:
        self.skip_ws()
        if self.pos >= len(self.line):
            self.fail("unexpected end of statement")
        ch = self.line[self.pos]
        if ch == "<":
            return self._read_iri()
        if ch == '"':
            return self._read_literal()
        if ch == "_" and self.line[self.pos:self.pos + 2] == "_:":
            return self._read_blank()
        self.fail(f"unexpected character {ch!r}")

    def _read_iri(self) -> Iri:
        end = self.line.find(">", self.pos + 1)
        if end < 0:
            self.fail("unterminated IRI")
        value = self.line[self.pos + 1:end]
        self.pos = end + 1
        if not value:
            self.fail("empty IRI")
        return Iri(value)

    def _read_blank(self) -> Blank:
        self.pos += 2
        start = self.pos
        while self.pos < len(self.line) and (
            self.line[self.pos].isalnum() or self.line[self.pos] in "_-"
        ):
            self.pos += 1
        if self.pos == start:
            self.fail("empty blank node label")
        return Blank(self.line[start:self.pos])

    def _read_literal(self) -> Literal:
        self.pos += 1
        out: list[str] = []
        while True:
            if self.pos >= len(self.line):
                self.fail("unterminated literal")
            ch = self.line[self.pos]
            if ch == '"':
                self.pos += 1
                break
            if ch == "\\":
                self.pos += 1
                if self.pos >= len(self.line):
                    self.fail("dangling escape")
                esc = self.line[self.pos]
                if esc in _UNESCAPES:
                    out.append(_UNESCAPES[esc])
                    self.pos += 1
                elif esc == "u" or esc == "U":
                    width = 4 if esc == "u" else 8
                    hexpart = self.line[self.pos + 1:self.pos + 1 + width]
                    if len(hexpart) != width:
                        self.fail("truncated unicode escape")
                    try:
                        out.append(chr(int(hexpart, 16)))
                    except ValueError:
                        self.fail("bad unicode escape")
                    self.pos += 1 + width
                else:
                    self.fail(f"unknown escape \\{esc}")
            else:
                out.append(ch)
                self.pos += 1
        datatype = None
        if self.line[self.pos:self.pos + 2] == "^^":
            self.pos += 2
            if self.pos >= len(self.line) or self.line[self.pos] != "<":
                self.fail("datatype must be an IRI")
            datatype = self._read_iri().value
        elif self.pos < len(self.line) and self.line[self.pos] == "@":
            self.fail("language-tagged literals are not supported")
        return Literal("".join(out), datatype)


def parse_nquads(text: str, default_graph: str | None = None) -> list[Quad]:
    """Parse N-Triples/N-Quads text; 3-term statements land in default_graph."""
    quads: list[Quad] = []
    # split on newlines only: other line-break code points may occur raw
    # inside literals and must not end a statement
    for line_no, raw in enumerate(text.split("\n"), start=1):
        raw = raw.rstrip("\r")
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parser = _LineParser(raw, line_no)
        terms: list[Term] = []
        while True:
            parser.skip_ws()
            if parser.pos < len(parser.line) and parser.line[parser.pos] == ".":
                parser.pos += 1
                break
            if parser.at_end():
                parser.fail("statement missing terminating '.'")
            terms.append(parser.read_term())
            if len(terms) > 4:
                parser.fail("too many terms in statement")
        if not parser.at_end():
            parser.fail("trailing content after '.'")
        if len(terms) < 3:
            raise RdfSyntax(line_no, "statement has fewer than three terms")
        s, p, o = terms[0], terms[1], terms[2]
        if not isinstance(s, (Iri, Blank)):
            raise RdfSyntax(line_no, "subject must be an IRI or blank node")
        if not isinstance(p, Iri):
            raise RdfSyntax(line_no, "predicate must be an IRI")
        if len(terms) == 4:
            if not isinstance(terms[3], Iri):
                raise RdfSyntax(line_no, "graph term must be an IRI")
            graph = terms[3]
        else:
            if default_graph is None:
                raise RdfSyntax(line_no, "triple statement but no default graph given")
            graph = Iri(default_graph)
        quads.append(Quad(s, p, o, graph))
    return quads
