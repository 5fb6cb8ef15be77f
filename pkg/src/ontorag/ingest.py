"""Parse ontology source files and transform them into quads.

Three source kinds are handled: two-column code/label text tables, code
tables in nested XML, and crosswalk rows with five positional attribute
flags. Parsed records become concept and mapping quads under the fixed
vocabulary, one named graph per source.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from ontorag.codes import display_code, normalize_code
from ontorag.errors import IoError, OntoragError
from ontorag import vocab as V
from ontorag.store.engine import QuadStore
from ontorag.store.terms import Iri, Literal, Quad
from ontorag.vocab import DEFAULT_VOCAB, VocabularyConfig


class IngestError(OntoragError):
    """Base for source-file parsing failures; `path` is set during ingest."""

    path: str | None = None

    def with_path(self, path: str) -> "IngestError":
        self.path = path
        self.args = (f"{path}: {self.args[0]}",)
        return self


class MalformedLine(IngestError):
    def __init__(self, line_no: int, detail: str = ""):
        self.line_no = line_no
        msg = f"malformed line {line_no}"
        super().__init__(msg + (f": {detail}" if detail else ""))


class MalformedFlags(IngestError):
    def __init__(self, line_no: int):
        self.line_no = line_no
        super().__init__(f"line {line_no}: flags must be exactly five digits")


class DuplicateCode(IngestError):
    def __init__(self, code: str):
        self.code = code
        super().__init__(f"code {code} repeats with a different label")


class XmlSyntax(IngestError):
    def __init__(self, position: tuple[int, int]):
        self.position = position
        super().__init__(f"XML syntax error at line {position[0]}, column {position[1]}")


class MissingElement(IngestError):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"incomplete code entry: {detail}")


@dataclass(frozen=True)
class CodeRecord:
    scheme_id: str
    code: str  # normalized, dotless, uppercase
    display_code: str
    label: str


@dataclass(frozen=True)
class GemEntry:
    source_code: str
    target_code: str  # normalized code, or the no-map placeholder verbatim
    approximate: bool
    no_map: bool
    combination: bool
    scenario: int
    choice_list: int

    @property
    def flag_string(self) -> str:
        return (
            f"{int(self.approximate)}{int(self.no_map)}{int(self.combination)}"
            f"{self.scenario}{self.choice_list}"
        )


@dataclass(frozen=True)
class ElementMap:
    """Element names carrying codes and labels in the XML source."""

    container: str = "diag"
    code: str = "name"
    label: str = "desc"


@dataclass
class ManifestEntry:
    kind: str  # "icd9-table" | "icd10-xml" | "gem-text"
    path: str
    graph_name: str
    scheme_id: str | None = None
    source_scheme: str | None = None
    target_scheme: str | None = None


@dataclass
class SourceManifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def validate(self):
        kinds = {"icd9-table", "icd10-xml", "gem-text"}
        graphs = [e.graph_name for e in self.entries]
        if len(set(graphs)) != len(graphs):
            raise ValueError("manifest graph names must be pairwise distinct")
        for entry in self.entries:
            if entry.kind not in kinds:
                raise ValueError(f"unknown source kind {entry.kind!r}")
            if entry.kind == "gem-text":
                if not (entry.source_scheme and entry.target_scheme):
                    raise ValueError("gem-text entries need source and target schemes")
            elif not entry.scheme_id:
                raise ValueError(f"{entry.kind} entries need a scheme_id")
            for scheme in (entry.scheme_id, entry.source_scheme, entry.target_scheme):
                # mapping graph IRIs join the scheme pair with '-'
                if scheme and "-" in scheme:
                    raise ValueError(f"scheme id {scheme!r} must not contain '-'")


def manifest_from_dict(data: dict, vocabulary: VocabularyConfig = DEFAULT_VOCAB) -> SourceManifest:
    """Build a manifest from parsed JSON, defaulting graph names by scheme."""
    entries = []
    for raw in data.get("entries", []):
        kind = raw.get("kind", "")
        graph = raw.get("graph_name")
        if not graph:
            if kind == "gem-text":
                graph = vocabulary.mapping_graph(
                    raw.get("source_scheme", ""), raw.get("target_scheme", "")
                )
            else:
                graph = vocabulary.scheme_graph(raw.get("scheme_id", ""))
        entries.append(
            ManifestEntry(
                kind=kind,
                path=raw.get("path", ""),
                graph_name=graph,
                scheme_id=raw.get("scheme_id"),
                source_scheme=raw.get("source_scheme"),
                target_scheme=raw.get("target_scheme"),
            )
        )
    manifest = SourceManifest(entries)
    manifest.validate()
    return manifest


@dataclass
class IngestReport:
    records_parsed: int = 0
    quads_emitted: int = 0
    dangling_refs: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "records_parsed": self.records_parsed,
            "quads_emitted": self.quads_emitted,
            "dangling_refs": [list(ref) for ref in self.dangling_refs],
            "warnings": list(self.warnings),
        }


# -- parsers ---------------------------------------------------------------


def parse_icd9_table(text: str, scheme_id: str = "icd9cm") -> list[CodeRecord]:
    """Parse a two-column CODE/LABEL table, one code per non-blank line."""
    records: list[CodeRecord] = []
    seen: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) < 2 or not parts[1].strip():
            raise MalformedLine(line_no, "expected CODE and LABEL")
        code = normalize_code(parts[0])
        label = parts[1].strip()
        if not code:
            raise MalformedLine(line_no, "empty code")
        if code in seen:
            if seen[code] != label:
                raise DuplicateCode(code)
            continue  # repeated identical line, e.g. duplicated headers
        seen[code] = label
        records.append(CodeRecord(scheme_id, code, display_code(scheme_id, code), label))
    return records


def parse_icd10_xml(
    xml: str,
    element_map: ElementMap = ElementMap(),
    scheme_id: str = "icd10cm",
) -> list[CodeRecord]:
    """Collect code/label pairs from every container element, depth first."""
    try:
        root = ET.fromstring(xml)
    except ET.ParseError as exc:
        raise XmlSyntax(exc.position) from exc
    records: list[CodeRecord] = []
    seen: dict[str, str] = {}
    # iter() walks the tree depth first and includes the root when it matches
    for elem in root.iter(element_map.container):
        code_el = elem.find(element_map.code)
        label_el = elem.find(element_map.label)
        code_text = (code_el.text or "").strip() if code_el is not None else ""
        label_text = (label_el.text or "").strip() if label_el is not None else ""
        if not code_text and not label_text:
            raise MissingElement(
                f"<{element_map.container}> without <{element_map.code}> or "
                f"<{element_map.label}>"
            )
        if not code_text:
            raise MissingElement(f"label {label_text!r} has no code")
        if not label_text:
            raise MissingElement(f"code {code_text!r} has no label")
        code = normalize_code(code_text)
        if code in seen:
            if seen[code] != label_text:
                raise DuplicateCode(code)
            continue
        seen[code] = label_text
        records.append(
            CodeRecord(scheme_id, code, display_code(scheme_id, code), label_text)
        )
    return records


def parse_gem(
    text: str, vocabulary: VocabularyConfig = DEFAULT_VOCAB
) -> list[GemEntry]:
    """Parse crosswalk rows: SOURCE TARGET FLAGS with five positional digits
    (approximate, no-map, combination, scenario, choice list)."""
    entries: list[GemEntry] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise MalformedLine(line_no, "expected SOURCE TARGET FLAGS")
        source, target, flags = parts
        if len(flags) != 5 or not flags.isdigit():
            raise MalformedFlags(line_no)
        if any(flags[i] not in "01" for i in range(3)):
            raise MalformedFlags(line_no)
        entries.append(
            GemEntry(
                source_code=normalize_code(source),
                target_code=(
                    target if vocabulary.is_no_map(target) else normalize_code(target)
                ),
                approximate=flags[0] == "1",
                no_map=flags[1] == "1",
                combination=flags[2] == "1",
                scenario=int(flags[3]),
                choice_list=int(flags[4]),
            )
        )
    return entries


def serialize_gem(entries: list[GemEntry]) -> str:
    lines = [f"{e.source_code} {e.target_code} {e.flag_string}" for e in entries]
    return "\n".join(lines) + ("\n" if lines else "")


def gem_entry_warnings(entry: GemEntry, vocabulary: VocabularyConfig) -> list[str]:
    """Attribute-consistency warnings for one crosswalk row."""
    out = []
    if entry.no_map and not vocabulary.is_no_map(entry.target_code):
        out.append(
            f"row {entry.source_code}->{entry.target_code}: no-map flag set but "
            f"target is not a placeholder"
        )
    if not entry.combination and (entry.scenario or entry.choice_list):
        out.append(
            f"row {entry.source_code}->{entry.target_code}: scenario/choice set "
            f"without combination flag"
        )
    return out


# -- transform ---------------------------------------------------------------


def _parent_code(code: str, codes: set[str]) -> str | None:
    """Longest proper prefix of the code that is itself a code in the batch."""
    for cut in range(len(code) - 1, 0, -1):
        prefix = code[:cut]
        if prefix in codes:
            return prefix
    return None


def concept_quads(
    records: list[CodeRecord],
    graph_name: str,
    vocabulary: VocabularyConfig = DEFAULT_VOCAB,
) -> list[Quad]:
    g = Iri(graph_name)
    batch_codes = {r.code for r in records}
    quads: list[Quad] = []
    for rec in records:
        subject = Iri(vocabulary.concept_iri(rec.scheme_id, rec.code))
        quads.append(Quad(subject, Iri(V.P_TYPE), Iri(V.CONCEPT_CLASS), g))
        quads.append(Quad(subject, Iri(V.P_CODE), Literal(rec.code), g))
        quads.append(Quad(subject, Iri(V.P_LABEL), Literal(rec.label), g))
        quads.append(
            Quad(subject, Iri(V.P_IN_SCHEME), Iri(vocabulary.scheme_iri(rec.scheme_id)), g)
        )
        parent = _parent_code(rec.code, batch_codes)
        if parent is not None:
            quads.append(
                Quad(
                    subject,
                    Iri(V.P_BROADER),
                    Iri(vocabulary.concept_iri(rec.scheme_id, parent)),
                    g,
                )
            )
    return quads


def mapping_quads(
    entries: list[GemEntry],
    source_scheme: str,
    target_scheme: str,
    graph_name: str,
    vocabulary: VocabularyConfig = DEFAULT_VOCAB,
) -> list[Quad]:
    """Seven quads per crosswalk row on a deterministic mapping node."""
    g = Iri(graph_name)
    quads: list[Quad] = []
    for entry in entries:
        node = Iri(
            vocabulary.mapping_iri(
                source_scheme,
                target_scheme,
                entry.source_code,
                entry.target_code,
                entry.flag_string,
            )
        )
        source = Iri(vocabulary.concept_iri(source_scheme, entry.source_code))
        if entry.no_map:
            target = Literal(entry.target_code)
        else:
            target = Iri(vocabulary.concept_iri(target_scheme, entry.target_code))
        quads.extend(
            [
                Quad(node, Iri(V.P_MAP_SOURCE), source, g),
                Quad(node, Iri(V.P_MAP_TARGET), target, g),
                Quad(node, Iri(V.P_APPROXIMATE), _bool_lit(entry.approximate), g),
                Quad(node, Iri(V.P_NO_MAP), _bool_lit(entry.no_map), g),
                Quad(node, Iri(V.P_COMBINATION), _bool_lit(entry.combination), g),
                Quad(node, Iri(V.P_SCENARIO), Literal(str(entry.scenario)), g),
                Quad(node, Iri(V.P_CHOICE_LIST), Literal(str(entry.choice_list)), g),
            ]
        )
    return quads


def _bool_lit(value: bool) -> Literal:
    return Literal("true" if value else "false")


def transform_to_quads(
    items,
    graph_name: str,
    vocabulary: VocabularyConfig = DEFAULT_VOCAB,
    source_scheme: str | None = None,
    target_scheme: str | None = None,
) -> list[Quad]:
    """Dispatch on item type; empty input yields no quads."""
    items = list(items)
    if not items:
        return []
    if isinstance(items[0], CodeRecord):
        return concept_quads(items, graph_name, vocabulary)
    if isinstance(items[0], GemEntry):
        if not (source_scheme and target_scheme):
            raise ValueError("mapping transform needs source and target schemes")
        return mapping_quads(items, source_scheme, target_scheme, graph_name, vocabulary)
    raise TypeError(f"cannot transform {type(items[0]).__name__}")


# -- pipeline ----------------------------------------------------------------


def ingest(
    manifest: SourceManifest,
    store: QuadStore,
    vocabulary: VocabularyConfig = DEFAULT_VOCAB,
) -> IngestReport:
    """Parse, transform, and load every manifest source, then check that all
    mapping endpoints resolve to concepts."""
    manifest.validate()
    report = IngestReport()
    endpoint_checks: list[tuple[str, str, Iri, str]] = []

    for entry in manifest.entries:
        try:
            with open(entry.path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise IoError(entry.path, str(exc)) from exc
        try:
            if entry.kind == "icd9-table":
                records = parse_icd9_table(text, entry.scheme_id or "icd9cm")
                quads = concept_quads(records, entry.graph_name, vocabulary)
                report.records_parsed += len(records)
            elif entry.kind == "icd10-xml":
                records = parse_icd10_xml(text, scheme_id=entry.scheme_id or "icd10cm")
                quads = concept_quads(records, entry.graph_name, vocabulary)
                report.records_parsed += len(records)
            else:
                gems = parse_gem(text, vocabulary)
                quads = mapping_quads(
                    gems,
                    entry.source_scheme or "",
                    entry.target_scheme or "",
                    entry.graph_name,
                    vocabulary,
                )
                report.records_parsed += len(gems)
                for gem in gems:
                    report.warnings.extend(gem_entry_warnings(gem, vocabulary))
                    src_iri = Iri(
                        vocabulary.concept_iri(entry.source_scheme or "", gem.source_code)
                    )
                    src_graph = vocabulary.scheme_graph(entry.source_scheme or "")
                    endpoint_checks.append((gem.source_code, "source", src_iri, src_graph))
                    if not gem.no_map:
                        tgt_iri = Iri(
                            vocabulary.concept_iri(
                                entry.target_scheme or "", gem.target_code
                            )
                        )
                        tgt_graph = vocabulary.scheme_graph(entry.target_scheme or "")
                        endpoint_checks.append(
                            (gem.target_code, "target", tgt_iri, tgt_graph)
                        )
        except IngestError as exc:
            raise exc.with_path(entry.path)
        report.quads_emitted += len(quads)
        store.insert_quads(quads)

    schema = store.introspect()
    seen_refs: set[tuple[str, str]] = set()
    for code, role, iri, graph in endpoint_checks:
        if schema.term_exists(iri, graph):
            continue
        ref = (code, role)
        if ref not in seen_refs:
            seen_refs.add(ref)
            report.dangling_refs.append(ref)
    return report
