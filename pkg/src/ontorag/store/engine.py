"""In-memory quad store: named graphs, set semantics, pattern-join execution.

Reads take a consistent snapshot under the store lock; writes are exclusive.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field

from ontorag.errors import IoError, OntoragError
from ontorag.store.nquads import parse_nquads, serialize_nquads
from ontorag.store.sparql import FilterExpr, QueryAst, Var
from ontorag.store.terms import Iri, Literal, Quad, Term, term_text, term_to_json
from ontorag.vocab import DEFAULT_GRAPH


class UnknownGraphError(OntoragError):
    def __init__(self, iri: str):
        self.iri = iri
        super().__init__(f"unknown graph <{iri}>")


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list[Term | None]]
    boolean: bool | None = None  # set for ASK

    def to_json(self) -> dict:
        out = {
            "columns": list(self.columns),
            "rows": [[term_to_json(cell) for cell in row] for row in self.rows],
        }
        if self.boolean is not None:
            out["boolean"] = self.boolean
        return out


@dataclass
class SchemaSummary:
    """Snapshot of what exists: graphs, predicates per graph, and terms that
    occur as subject or object per graph."""

    graphs: frozenset[str]
    predicates_by_graph: dict[str, frozenset[str]]
    terms_by_graph: dict[str, frozenset[Term]] = field(repr=False, default_factory=dict)

    def term_exists(self, term: Term, graph: str) -> bool:
        return term in self.terms_by_graph.get(graph, frozenset())


class QuadStore:
    def __init__(self):
        self._lock = threading.RLock()
        self._quads: set[Quad] = set()
        self._by_graph: dict[str, set[Quad]] = {}
        self._by_graph_pred: dict[tuple[str, str], list[Quad]] = {}

    def __len__(self) -> int:
        with self._lock:
            return len(self._quads)

    # -- mutation ------------------------------------------------------------

    def insert_quads(self, quads) -> int:
        """Insert quads with set semantics; returns the count of new ones."""
        added = 0
        with self._lock:
            for quad in quads:
                if quad in self._quads:
                    continue
                self._quads.add(quad)
                self._by_graph.setdefault(quad.g.value, set()).add(quad)
                self._by_graph_pred.setdefault(
                    (quad.g.value, quad.p.value), []
                ).append(quad)
                added += 1
        return added

    def load_nquads(self, path: str, default_graph: str | None = None) -> int:
        """Load statements from a file; triples go to default_graph."""
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise IoError(path, str(exc)) from exc
        quads = parse_nquads(text, default_graph or DEFAULT_GRAPH)
        return self.insert_quads(quads)

    def export_nquads(self, path: str, graphs: list[str] | None = None) -> int:
        """Write the store (or the named graphs) as sorted N-Quads lines."""
        with self._lock:
            if graphs is None:
                selected = list(self._quads)
            else:
                selected = [q for g in graphs for q in self._by_graph.get(g, ())]
        text = serialize_nquads(sorted(selected, key=quad_sort_key))
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise IoError(path, str(exc)) from exc
        return len(selected)

    # -- inspection ------------------------------------------------------------

    def graphs(self) -> set[str]:
        with self._lock:
            return set(self._by_graph)

    def match(self, s=None, p=None, o=None, g: str | None = None):
        """All quads matching the given constant positions (None = wildcard)."""
        with self._lock:
            if g is not None and p is not None:
                pool = list(self._by_graph_pred.get((g, p.value), ()))
            elif g is not None:
                pool = list(self._by_graph.get(g, ()))
            else:
                pool = list(self._quads)
        for quad in pool:
            if s is not None and quad.s != s:
                continue
            if p is not None and quad.p != p:
                continue
            if o is not None and quad.o != o:
                continue
            yield quad

    def introspect(self) -> SchemaSummary:
        with self._lock:
            preds: dict[str, frozenset[str]] = {}
            terms: dict[str, frozenset[Term]] = {}
            for graph, quads in self._by_graph.items():
                preds[graph] = frozenset(q.p.value for q in quads)
                bucket: set[Term] = set()
                for q in quads:
                    bucket.add(q.s)
                    bucket.add(q.o)
                terms[graph] = frozenset(bucket)
            return SchemaSummary(frozenset(self._by_graph), preds, terms)

    # -- query execution -------------------------------------------------------

    def execute(self, ast: QueryAst) -> ResultTable:
        """Join all triple patterns, apply filters, project.

        SELECT returns the natural join restricted by filters, deduplicated
        under DISTINCT and truncated at LIMIT; ASK reports whether at least
        one binding exists.
        """
        with self._lock:
            graph_names = sorted(self._by_graph)
            plan: list[tuple[object, object]] = []
            for group in ast.groups:
                if isinstance(group.graph, Iri):
                    if group.graph.value not in self._by_graph:
                        raise UnknownGraphError(group.graph.value)
                for tp in group.triples:
                    plan.append((group.graph, tp))
            snapshot = {g: list(qs) for g, qs in self._by_graph.items()}

        solutions: list[dict[str, Term]] = [{}]
        for scope, tp in plan:
            next_solutions: list[dict[str, Term]] = []
            for binding in solutions:
                for graph in _scope_graphs(scope, binding, graph_names):
                    for quad in snapshot.get(graph, ()):
                        extended = _unify(tp, quad, binding)
                        if extended is None:
                            continue
                        if isinstance(scope, Var):
                            prior = extended.get(scope.name)
                            if prior is not None and term_text(prior) != graph:
                                continue
                            extended = dict(extended)
                            extended[scope.name] = Iri(graph)
                        next_solutions.append(extended)
            solutions = next_solutions
            if not solutions:
                break

        solutions = [b for b in solutions if _passes_filters(b, ast.filters)]

        if ast.form == "ASK":
            return ResultTable(columns=[], rows=[], boolean=bool(solutions))

        columns = ast.projection if ast.projection is not None else ast.variables()
        rows = [[binding.get(name) for name in columns] for binding in solutions]
        if ast.distinct:
            rows = _dedupe_rows(rows)
        if ast.limit is not None:
            rows = rows[: ast.limit]
        return ResultTable(columns=list(columns), rows=rows)


def _scope_graphs(scope, binding: dict[str, Term], graph_names: list[str]):
    if isinstance(scope, Iri):
        return [scope.value]
    if isinstance(scope, Var):
        bound = binding.get(scope.name)
        if bound is not None:
            return [term_text(bound)]
        return graph_names
    return graph_names


def _unify(tp, quad: Quad, binding: dict[str, Term]) -> dict[str, Term] | None:
    out = binding
    for part, value in ((tp.s, quad.s), (tp.p, quad.p), (tp.o, quad.o)):
        if isinstance(part, Var):
            bound = out.get(part.name)
            if bound is None:
                if out is binding:
                    out = dict(binding)
                out[part.name] = value
            elif bound != value:
                return None
        elif part != value:
            return None
    return dict(out) if out is binding else out


def _passes_filters(binding: dict[str, Term], filters: list[FilterExpr]) -> bool:
    for f in filters:
        lhs = _filter_value(f.lhs, binding)
        rhs = _filter_value(f.rhs, binding)
        if f.kind == "eq":
            if lhs != rhs:
                return False
        elif f.kind == "contains":
            if rhs not in lhs:
                return False
        elif f.kind == "regex":
            flags = re.IGNORECASE if "i" in f.flags else 0
            if re.search(rhs, lhs, flags) is None:
                return False
    return True


def _filter_value(side, binding: dict[str, Term]) -> str:
    if isinstance(side, Var):
        return term_text(binding[side.name])
    return term_text(side)


def _dedupe_rows(rows: list[list[Term | None]]) -> list[list[Term | None]]:
    seen: set[tuple] = set()
    out = []
    for row in rows:
        key = tuple(row)
        if key in seen:
            continue
        seen.add(key)
        out.append(row)
    return out


def _term_sort_key(term: Term) -> tuple[int, str, str]:
    if isinstance(term, Iri):
        return (0, term.value, "")
    if isinstance(term, Literal):
        return (1, term.lexical, term.datatype or "")
    return (2, term.label, "")


def quad_sort_key(quad: Quad):
    return (
        _term_sort_key(quad.g),
        _term_sort_key(quad.s),
        _term_sort_key(quad.p),
        _term_sort_key(quad.o),
    )
