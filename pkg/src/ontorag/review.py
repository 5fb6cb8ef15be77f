"""HTTP review service for candidate mappings.

Candidates are materialized from the mapping graphs; coding experts accept or
reject them one by one or in bulk by predicted level. Decisions go to an
append-only JSON-lines log that is replayed at startup, so the current status
map is always reproducible from the log alone. Accepted mappings can be
exported as quads in a dedicated refined-mapping graph.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from ontorag import vocab as V
from ontorag.errors import IoError
from ontorag.ingest import GemEntry, mapping_quads
from ontorag.llm import GatewayError, make_provider
from ontorag.nl2sparql import (
    ExhaustedAttempts,
    Nl2SparqlConfig,
    answer,
    load_example_bank,
)
from ontorag.reasoning import (
    Assessment,
    LabeledCode,
    StrategyConfig,
    assess_pairs,
    make_strategy,
    summarize,
)
from ontorag.store.engine import QuadStore, quad_sort_key
from ontorag.store.nquads import serialize_nquads
from ontorag.store.terms import Iri, Literal
from ontorag.vocab import DEFAULT_VOCAB, parse_concept_iri

SCHEMA_VERSION = "1"

STATUSES = ("pending", "accepted", "rejected")
ACTIONS = ("accept", "reject", "reset")
_ACTION_TO_STATUS = {"accept": "accepted", "reject": "rejected", "reset": "pending"}


def candidate_id(
    source_scheme: str,
    source_code: str,
    target_scheme: str,
    target_code: str,
    flag_string: str,
) -> str:
    """Stable id from the fields that survive re-ingest."""
    digest = hashlib.sha256(
        "\x1f".join(
            [source_scheme, source_code, target_scheme, target_code, flag_string]
        ).encode("utf-8")
    )
    return digest.hexdigest()[:16]


@dataclass
class CandidateSide:
    scheme: str
    code: str
    label: str | None = None

    def to_json(self) -> dict:
        return {"scheme": self.scheme, "code": self.code, "label": self.label}


@dataclass
class MappingCandidate:
    id: str
    source: CandidateSide
    target: CandidateSide
    approximate: bool
    no_map: bool
    combination: bool
    scenario: int
    choice_list: int
    status: str = "pending"
    assessment: Assessment | None = None

    @property
    def flag_string(self) -> str:
        return (
            f"{int(self.approximate)}{int(self.no_map)}{int(self.combination)}"
            f"{self.scenario}{self.choice_list}"
        )

    @property
    def level(self) -> str | None:
        return self.assessment.level.value if self.assessment else None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "source": self.source.to_json(),
            "target": self.target.to_json(),
            "approximate": self.approximate,
            "no_map": self.no_map,
            "combination": self.combination,
            "scenario": self.scenario,
            "choice_list": self.choice_list,
            "status": self.status,
            "level": self.level,
            "reasoning": self.assessment.reasoning if self.assessment else None,
        }


@dataclass
class Decision:
    candidate_id: str
    action: str
    reviewer: str
    timestamp: str
    note: str | None = None
    via_bulk: bool = False

    def to_json(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "action": self.action,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp,
            "note": self.note,
            "via_bulk": self.via_bulk,
        }


class DecisionLog:
    """Append-only JSON-lines file; a torn trailing line is skipped on replay."""

    def __init__(self, path: str):
        self.path = path

    def append(self, decision: Decision):
        line = json.dumps(decision.to_json()) + "\n"
        try:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise IoError(self.path, str(exc)) from exc

    def replay(self) -> list[Decision]:
        decisions: list[Decision] = []
        if not os.path.exists(self.path):
            return decisions
        try:
            with open(self.path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise IoError(self.path, str(exc)) from exc
        for raw in lines:
            raw = raw.strip()
            if not raw:
                continue
            try:
                data = json.loads(raw)
                decisions.append(
                    Decision(
                        candidate_id=data["candidate_id"],
                        action=data["action"],
                        reviewer=data.get("reviewer", ""),
                        timestamp=data.get("timestamp", ""),
                        note=data.get("note"),
                        via_bulk=bool(data.get("via_bulk", False)),
                    )
                )
            except (ValueError, KeyError):
                continue  # torn or foreign line
        return decisions


def _graph_schemes(graph: str) -> tuple[str, str]:
    """Scheme pair encoded in a mapping graph IRI (schemes carry no '-')."""
    rest = graph[len(V.MAPPING_GRAPH_PREFIX):]
    src, _, dst = rest.partition("-")
    return src, dst


def materialize_candidates(store: QuadStore, vocabulary=DEFAULT_VOCAB) -> list[MappingCandidate]:
    """One candidate per mapping node found in any mapping graph, sorted by id."""
    nodes: dict[str, dict] = {}
    node_graphs: dict[str, str] = {}
    for graph in sorted(store.graphs()):
        if not graph.startswith(V.MAPPING_GRAPH_PREFIX) or graph == V.REFINED_GRAPH:
            continue
        for quad in store.match(g=graph):
            bucket = nodes.setdefault(quad.s.value, {})
            bucket[quad.p.value] = quad.o
            node_graphs[quad.s.value] = graph

    candidates = []
    for node, props in nodes.items():
        source_term = props.get(V.P_MAP_SOURCE)
        target_term = props.get(V.P_MAP_TARGET)
        if not isinstance(source_term, Iri) or target_term is None:
            continue
        parsed = parse_concept_iri(source_term.value)
        if parsed is None:
            continue
        source = CandidateSide(parsed[0], parsed[1], _label_of(store, source_term))
        if isinstance(target_term, Literal):
            # no-map placeholder: scheme comes from the graph name
            _, dst_scheme = _graph_schemes(node_graphs[node])
            target = CandidateSide(dst_scheme, target_term.lexical, None)
        elif isinstance(target_term, Iri):
            tparsed = parse_concept_iri(target_term.value)
            if tparsed is None:
                continue
            target = CandidateSide(tparsed[0], tparsed[1], _label_of(store, target_term))
        else:
            continue
        flags = {
            name: _lex(props.get(pred))
            for name, pred in (
                ("approximate", V.P_APPROXIMATE),
                ("no_map", V.P_NO_MAP),
                ("combination", V.P_COMBINATION),
                ("scenario", V.P_SCENARIO),
                ("choice_list", V.P_CHOICE_LIST),
            )
        }
        candidate = MappingCandidate(
            id="",
            source=source,
            target=target,
            approximate=flags["approximate"] == "true",
            no_map=flags["no_map"] == "true",
            combination=flags["combination"] == "true",
            scenario=int(flags["scenario"] or 0),
            choice_list=int(flags["choice_list"] or 0),
        )
        candidate.id = candidate_id(
            source.scheme, source.code, target.scheme, target.code, candidate.flag_string
        )
        candidates.append(candidate)
    candidates.sort(key=lambda c: c.id)
    return candidates


def _label_of(store: QuadStore, subject: Iri) -> str | None:
    for quad in store.match(s=subject, p=Iri(V.P_LABEL)):
        if isinstance(quad.o, Literal):
            return quad.o.lexical
    return None


def _lex(term) -> str:
    return term.lexical if isinstance(term, Literal) else ""


@dataclass
class ServiceSettings:
    store_paths: list[str] = field(default_factory=list)
    decision_log: str = "decisions.log"
    provider: object | None = None  # ProviderConfig
    strategy: str = "few-shot"
    temperature: float = 0.2
    max_attempts: int = 5
    example_bank_path: str | None = None
    static_dir: str | None = None


class ReviewState:
    """Everything behind the HTTP surface: store, candidates, decisions."""

    def __init__(self, store: QuadStore, settings: ServiceSettings):
        self.store = store
        self.settings = settings
        self.log = DecisionLog(settings.decision_log)
        self.lock = threading.Lock()
        self.candidates: dict[str, MappingCandidate] = {
            c.id: c for c in materialize_candidates(store)
        }
        self.decisions_total = 0
        self.decisions_bulk = 0
        self._assessed = False
        self.assessment_failures: list[str] = []
        self.provider = (
            make_provider(settings.provider) if settings.provider else None
        )
        self.strategy: StrategyConfig | None = (
            make_strategy(settings.strategy, settings.temperature)
            if settings.provider
            else None
        )
        for decision in self.log.replay():
            self._apply(decision)

    # -- decisions -----------------------------------------------------------

    def _apply(self, decision: Decision):
        candidate = self.candidates.get(decision.candidate_id)
        if candidate is None or decision.action not in _ACTION_TO_STATUS:
            return
        candidate.status = _ACTION_TO_STATUS[decision.action]
        self.decisions_total += 1
        if decision.via_bulk:
            self.decisions_bulk += 1

    def decide(
        self,
        cand_id: str,
        action: str,
        reviewer: str,
        note: str | None = None,
        via_bulk: bool = False,
    ) -> MappingCandidate:
        if action not in ACTIONS:
            raise ValueError(f"unknown action {action!r}")
        with self.lock:
            candidate = self.candidates.get(cand_id)
            if candidate is None:
                raise KeyError(cand_id)
            decision = Decision(
                candidate_id=cand_id,
                action=action,
                reviewer=reviewer,
                timestamp=datetime.now(timezone.utc).isoformat(),
                note=note,
                via_bulk=via_bulk,
            )
            self.log.append(decision)
            self._apply(decision)
            return candidate

    def bulk_decide(self, level: str, action: str, reviewer: str) -> int:
        if action not in ("accept", "reject"):
            raise ValueError(f"unknown bulk action {action!r}")
        if level not in ("A", "B", "C"):
            raise ValueError(f"unknown level {level!r}")
        self.ensure_assessed()
        with self.lock:
            targets = [
                c
                for c in sorted(self.candidates.values(), key=lambda c: c.id)
                if c.status == "pending" and c.level == level
            ]
            for candidate in targets:
                decision = Decision(
                    candidate_id=candidate.id,
                    action=action,
                    reviewer=reviewer,
                    timestamp=datetime.now(timezone.utc).isoformat(),
                    via_bulk=True,
                )
                self.log.append(decision)
                self._apply(decision)
            return len(targets)

    # -- assessments -----------------------------------------------------------

    def ensure_assessed(self):
        """Assess every assessable candidate once, in id order, and cache."""
        if self._assessed or self.provider is None or self.strategy is None:
            return
        with self.lock:
            if self._assessed:
                return
            for candidate in sorted(self.candidates.values(), key=lambda c: c.id):
                if candidate.assessment is not None:
                    continue
                if not candidate.source.label or not candidate.target.label:
                    continue  # no-map rows and unlabeled endpoints stay ungraded
                pair = (
                    LabeledCode(candidate.source.label, candidate.source.code),
                    LabeledCode(candidate.target.label, candidate.target.code),
                )
                assessments, failures = assess_pairs(
                    [pair], self.strategy, self.provider
                )
                if assessments:
                    candidate.assessment = assessments[0]
                for failure in failures:
                    self.assessment_failures.append(failure.error)
            self._assessed = True

    # -- queries -----------------------------------------------------------

    def list_candidates(
        self, level: str | None, status: str | None, page: int, page_size: int
    ) -> dict:
        self.ensure_assessed()
        with self.lock:
            pool = sorted(self.candidates.values(), key=lambda c: c.id)
        if status is not None:
            pool = [c for c in pool if c.status == status]
        if level is not None:
            pool = [c for c in pool if c.level == level]
        total = len(pool)
        start = (page - 1) * page_size
        items = pool[start:start + page_size]
        return {
            "total": total,
            "page": page,
            "page_size": page_size,
            "items": [c.to_json() for c in items],
        }

    def stats(self) -> dict:
        self.ensure_assessed()
        with self.lock:
            by_status = {status: 0 for status in STATUSES}
            by_level = {"A": 0, "B": 0, "C": 0, "unassessed": 0}
            for candidate in self.candidates.values():
                by_status[candidate.status] += 1
                by_level[candidate.level or "unassessed"] += 1
            return {
                "candidates": len(self.candidates),
                "by_status": by_status,
                "by_level": by_level,
                "decisions_total": self.decisions_total,
                "decisions_bulk": self.decisions_bulk,
            }

    def export_refined(self, path: str) -> int:
        """Write accepted candidates' mapping quads into the refined graph."""
        with self.lock:
            accepted = [
                c
                for c in sorted(self.candidates.values(), key=lambda c: c.id)
                if c.status == "accepted"
            ]
        quads = []
        for candidate in accepted:
            entry = GemEntry(
                source_code=candidate.source.code,
                target_code=candidate.target.code,
                approximate=candidate.approximate,
                no_map=candidate.no_map,
                combination=candidate.combination,
                scenario=candidate.scenario,
                choice_list=candidate.choice_list,
            )
            quads.extend(
                mapping_quads(
                    [entry], candidate.source.scheme, candidate.target.scheme,
                    V.REFINED_GRAPH,
                )
            )
        text = serialize_nquads(sorted(quads, key=quad_sort_key))
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise IoError(path, str(exc)) from exc
        return len(quads)

    def run_query(self, question: str) -> dict:
        if self.provider is None:
            raise GatewayError("no provider configured")
        bank = load_example_bank(self.settings.example_bank_path)
        cfg = Nl2SparqlConfig(max_attempts=self.settings.max_attempts)
        result = answer(question, self.store, self.provider, cfg, bank)
        pairs = self._concept_pairs(result.result)
        assessments: list[Assessment] = []
        failures = []
        summary = None
        if pairs and self.strategy is not None:
            assessments, failures = assess_pairs(pairs, self.strategy, self.provider)
            if assessments:
                summary = summarize(question, assessments, self.provider)
        return {
            "sparql": result.sparql,
            "attempts": [a.to_json() for a in result.trace.attempts],
            "columns": result.result.columns,
            "rows": result.result.to_json()["rows"],
            "boolean": result.result.boolean,
            "assessments": [a.to_json() for a in assessments],
            "assessment_failures": [f.error for f in failures],
            "summary": summary,
        }

    def _concept_pairs(self, table) -> list[tuple[LabeledCode, LabeledCode]]:
        """A row yields a (queried, retrieved) pair when it carries at least
        two concept IRIs, taken in column order."""
        pairs: list[tuple[LabeledCode, LabeledCode]] = []
        seen: set[tuple[str, str]] = set()
        for row in table.rows:
            concepts = []
            for cell in row:
                if isinstance(cell, Iri) and parse_concept_iri(cell.value):
                    concepts.append(cell)
            if len(concepts) < 2:
                continue
            first, second = concepts[0], concepts[1]
            key = (first.value, second.value)
            if key in seen:
                continue
            seen.add(key)
            pairs.append((self._labeled(first), self._labeled(second)))
        return pairs

    def _labeled(self, iri: Iri) -> LabeledCode:
        parsed = parse_concept_iri(iri.value)
        code = parsed[1] if parsed else iri.value
        label = _label_of(self.store, iri)
        return LabeledCode(label=label or code, code=code)


class DecisionBody(BaseModel):
    action: str
    reviewer: str = ""
    note: str | None = None


class BulkBody(BaseModel):
    level: str
    action: str
    reviewer: str = ""


class QueryBody(BaseModel):
    question: str


def create_app(state: ReviewState) -> FastAPI:
    app = FastAPI(title="ontorag review service")
    app.state.review = state

    def _versioned(payload: dict) -> dict:
        payload["schema_version"] = SCHEMA_VERSION
        return payload

    @app.get("/v1/candidates")
    def list_candidates(
        level: str | None = None,
        status: str | None = None,
        page: int = 1,
        page_size: int = 50,
    ):
        if level is not None and level not in ("A", "B", "C"):
            raise HTTPException(400, f"unknown level {level!r}")
        if status is not None and status not in STATUSES:
            raise HTTPException(400, f"unknown status {status!r}")
        if page < 1 or page_size < 1:
            raise HTTPException(400, "page and page_size must be positive")
        page_size = min(page_size, 500)
        return _versioned(state.list_candidates(level, status, page, page_size))

    @app.post("/v1/candidates/{cand_id}/decision")
    def decide(cand_id: str, body: DecisionBody):
        try:
            candidate = state.decide(cand_id, body.action, body.reviewer, body.note)
        except KeyError:
            raise HTTPException(404, f"unknown candidate {cand_id!r}") from None
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from None
        return _versioned({"candidate": candidate.to_json()})

    @app.post("/v1/candidates/bulk-decision")
    def bulk(body: BulkBody):
        try:
            affected = state.bulk_decide(body.level, body.action, body.reviewer)
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from None
        return _versioned({"affected": affected})

    @app.get("/v1/stats")
    def stats():
        return _versioned(state.stats())

    @app.post("/v1/query")
    def query(body: QueryBody):
        try:
            return _versioned(state.run_query(body.question))
        except ExhaustedAttempts as exc:
            raise HTTPException(
                422,
                detail={
                    "error": "exhausted attempts",
                    "attempts": [a.to_json() for a in exc.trace.attempts],
                },
            ) from None
        except GatewayError as exc:
            raise HTTPException(502, str(exc)) from None

    if state.settings.static_dir and os.path.isdir(state.settings.static_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount(
            "/", StaticFiles(directory=state.settings.static_dir, html=True), name="ui"
        )

    return app


def build_state(settings: ServiceSettings) -> ReviewState:
    store = QuadStore()
    for path in settings.store_paths:
        store.load_nquads(path)
    return ReviewState(store, settings)
