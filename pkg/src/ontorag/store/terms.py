"""RDF term and quad types. All frozen so quads obey set semantics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union


@dataclass(frozen=True)
class Iri:
    value: str


@dataclass(frozen=True)
class Blank:
    label: str


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: str | None = None


Term = Union[Iri, Literal, Blank]


@dataclass(frozen=True)
class Quad:
    s: Iri | Blank
    p: Iri
    o: Term
    g: Iri


def term_text(term: Term) -> str:
    """The comparable text of a term: IRI string, literal lexical form, or
    blank node label. Used by FILTER evaluation and display."""
    if isinstance(term, Iri):
        return term.value
    if isinstance(term, Literal):
        return term.lexical
    return term.label


def term_to_json(term: Term | None) -> dict | None:
    if term is None:
        return None
    if isinstance(term, Iri):
        return {"type": "iri", "value": term.value}
    if isinstance(term, Blank):
        return {"type": "blank", "value": term.label}
    out: dict = {"type": "literal", "value": term.lexical}
    if term.datatype:
        out["datatype"] = term.datatype
    return out
