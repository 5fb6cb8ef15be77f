"""Biomedical code-mapping toolkit: ingest code systems into RDF named graphs,
query them with LLM-generated SPARQL, grade mapping proximity, evaluate
predictions, and review candidate mappings."""

__version__ = "0.1.0"
