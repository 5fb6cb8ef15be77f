"""RDF quad store with named graphs and a SPARQL SELECT/ASK subset."""

from ontorag.store.engine import (
    QuadStore,
    ResultTable,
    SchemaSummary,
    UnknownGraphError,
)
from ontorag.store.nquads import RdfSyntax, parse_nquads, serialize_nquads
from ontorag.store.sparql import (
    FilterExpr,
    PatternGroup,
    QueryAst,
    SparqlSyntax,
    TriplePattern,
    UnsupportedFeature,
    Var,
    parse_sparql,
)
from ontorag.store.terms import Blank, Iri, Literal, Quad, Term, term_text
from ontorag.store.validate import ValidationIssue, ValidationReport, validate_query

__all__ = [
    "Blank",
    "FilterExpr",
    "Iri",
    "Literal",
    "PatternGroup",
    "Quad",
    "QuadStore",
    "QueryAst",
    "RdfSyntax",
    "ResultTable",
    "SchemaSummary",
    "SparqlSyntax",
    "Term",
    "TriplePattern",
    "UnknownGraphError",
    "UnsupportedFeature",
    "ValidationIssue",
    "ValidationReport",
    "Var",
    "parse_nquads",
    "parse_sparql",
    "serialize_nquads",
    "term_text",
    "validate_query",
]
