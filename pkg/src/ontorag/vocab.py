"""Fixed IRI vocabulary for the quad store.

Every graph, concept, and predicate IRI the pipeline emits or queries is
minted here so that stores, generated SPARQL, and exports stay bit-compatible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

PREFIX = "urn:ontorag:"

P_TYPE = PREFIX + "p:type"
P_CODE = PREFIX + "p:code"
P_LABEL = PREFIX + "p:label"
P_IN_SCHEME = PREFIX + "p:inScheme"
P_BROADER = PREFIX + "p:broader"
P_MAP_SOURCE = PREFIX + "p:mapSource"
P_MAP_TARGET = PREFIX + "p:mapTarget"
P_APPROXIMATE = PREFIX + "p:approximate"
P_NO_MAP = PREFIX + "p:noMap"
P_COMBINATION = PREFIX + "p:combination"
P_SCENARIO = PREFIX + "p:scenario"
P_CHOICE_LIST = PREFIX + "p:choiceList"

CONCEPT_CLASS = PREFIX + "class:Concept"

DEFAULT_GRAPH = PREFIX + "graph:default"
REFINED_GRAPH = PREFIX + "graph:map:refined"
MAPPING_GRAPH_PREFIX = PREFIX + "graph:map:"
CONCEPT_PREFIX = PREFIX + "concept:"


@dataclass(frozen=True)
class VocabularyConfig:
    """IRI minting rules plus the no-map placeholder conventions."""

    prefix: str = PREFIX
    no_map_placeholders: frozenset[str] = field(
        default_factory=lambda: frozenset({"NoDx", "NoPx"})
    )

    def scheme_graph(self, scheme_id: str) -> str:
        return f"{self.prefix}graph:{scheme_id}"

    def mapping_graph(self, source_scheme: str, target_scheme: str) -> str:
        return f"{self.prefix}graph:map:{source_scheme}-{target_scheme}"

    def concept_iri(self, scheme_id: str, code: str) -> str:
        return f"{self.prefix}concept:{scheme_id}:{code}"

    def scheme_iri(self, scheme_id: str) -> str:
        return f"{self.prefix}scheme:{scheme_id}"

    def mapping_iri(
        self,
        source_scheme: str,
        target_scheme: str,
        source_code: str,
        target_code: str,
        flag_string: str,
    ) -> str:
        return (
            f"{self.prefix}mapping:{source_scheme}-{target_scheme}:"
            f"{source_code}:{target_code}:{flag_string}"
        )

    def is_no_map(self, target_code: str) -> bool:
        return target_code in self.no_map_placeholders


def parse_concept_iri(iri: str) -> tuple[str, str] | None:
    """Split a concept IRI back into (scheme_id, code); None if not a concept."""
    if not iri.startswith(CONCEPT_PREFIX):
        return None
    rest = iri[len(CONCEPT_PREFIX):]
    scheme, sep, code = rest.rpartition(":")
    if not sep or not scheme or not code:
        return None
    return scheme, code


DEFAULT_VOCAB = VocabularyConfig()
