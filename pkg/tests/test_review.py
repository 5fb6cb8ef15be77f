import json

import pytest
from fastapi.testclient import TestClient

from ontorag.llm import ChatMessage, ProviderConfig, fingerprint
from ontorag.reasoning import make_strategy, render_level_prompt
from ontorag.review import (
    Decision,
    DecisionLog,
    ReviewState,
    ServiceSettings,
    candidate_id,
    create_app,
)

from conftest import build_fixture_store

A_PAIRS = [
    ("Acute kidney failure, unspecified", "Acute kidney failure, unspecified"),
    ("Urinary tract infection, site not specified",
     "Urinary tract infection, site not specified"),
    ("Hyposmolality and/or hyponatremia", "Hypo-osmolality and hyponatremia"),
    ("Renal dialysis status", "Dependence on renal dialysis"),
]
C_PAIRS = [
    ("Chronic kidney disease, unspecified", "Chronic kidney disease (CKD)"),
]


def keyed_script() -> dict:
    strategy = make_strategy("zero-shot")
    keyed = {}
    for pairs, letter in ((A_PAIRS, "A"), (C_PAIRS, "C")):
        for d1, d2 in pairs:
            prompt = render_level_prompt(d1, d2, strategy)
            keyed[fingerprint([ChatMessage("user", prompt)])] = letter
    return {"keyed": keyed, "default": "B"}


def make_state(tmp_path, script: dict | None = None, log_name="decisions.log") -> ReviewState:
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps(script if script is not None else keyed_script()))
    settings = ServiceSettings(
        decision_log=str(tmp_path / log_name),
        provider=ProviderConfig(kind="scripted-mock", script_path=str(script_path)),
        strategy="zero-shot",
    )
    store, _ = build_fixture_store()
    return ReviewState(store, settings)


@pytest.fixture
def state(tmp_path) -> ReviewState:
    return make_state(tmp_path)


@pytest.fixture
def client(state) -> TestClient:
    return TestClient(create_app(state))


class TestMaterialization:
    def test_one_candidate_per_mapping_row(self, state):
        assert len(state.candidates) == 30

    def test_ids_are_stable_across_builds(self, tmp_path):
        first = make_state(tmp_path, log_name="a.log")
        second = make_state(tmp_path, log_name="b.log")
        assert set(first.candidates) == set(second.candidates)

    def test_id_derivation(self):
        cid = candidate_id("icd9cm", "5849", "icd10cm", "N179", "00000")
        assert len(cid) == 16
        assert cid == candidate_id("icd9cm", "5849", "icd10cm", "N179", "00000")

    def test_no_map_candidate_kept_without_label(self, state):
        no_map = [c for c in state.candidates.values() if c.no_map]
        assert len(no_map) == 1
        assert no_map[0].target.code == "NoDx"
        assert no_map[0].target.label is None

    def test_labels_resolved_from_concept_graphs(self, state):
        labelled = [c for c in state.candidates.values() if c.source.label]
        assert len(labelled) == 30


class TestListing:
    def test_unfiltered_lists_allainted(self, client):
        response = client.get("/v1/candidates", params={"page_size": 500})
        body = response.json()
        assert response.status_code == 200
        assert body["schema_version"] == "1"
        assert body["total"] == 30
        assert len(body["items"]) == 30

    def test_level_filter_returns_only_that_level(self, client):
        body = client.get("/v1/candidates", params={"level": "A", "page_size": 100}).json()
        assert body["total"] == len(A_PAIRS)
        assert all(item["level"] == "A" for item in body["items"])

    @pytest.mark.parametrize("filters", [{}, {"level": "B"}, {"status": "pending"}])
    def test_pagination_union_equals_unpaginated(self, client, filters):
        seen = []
        page = 1
        while True:
            body = client.get(
                "/v1/candidates", params={**filters, "page": page, "page_size": 7}
            ).json()
            if not body["items"]:
                break
            seen.extend(item["id"] for item in body["items"])
            page += 1
        full = client.get("/v1/candidates", params={**filters, "page_size": 500}).json()
        assert sorted(seen) == sorted(item["id"] for item in full["items"])
        assert len(set(seen)) == len(seen)

    def test_unknown_level_is_400(self, client):
        assert client.get("/v1/candidates", params={"level": "Q"}).status_code == 400

    def test_unknown_status_is_400(self, client):
        assert client.get("/v1/candidates", params={"status": "zzz"}).status_code == 400

    def test_page_size_capped(self, client):
        body = client.get("/v1/candidates", params={"page_size": 9999}).json()
        assert body["page_size"] == 500

    def test_stable_order_by_id(self, client):
        body = client.get("/v1/candidates", params={"page_size": 500}).json()
        ids = [item["id"] for item in body["items"]]
        assert ids == sorted(ids)


class TestDecisions:
    def _first_id(self, client) -> str:
        return client.get("/v1/candidates").json()["items"][0]["id"]

    def test_accept_pending(self, client):
        cid = self._first_id(client)
        response = client.post(
            f"/v1/candidates/{cid}/decision",
            json={"action": "accept", "reviewer": "amy"},
        )
        assert response.status_code == 200
        assert response.json()["candidate"]["status"] == "accepted"

    def test_reset_returns_to_pending(self, client):
        cid = self._first_id(client)
        client.post(f"/v1/candidates/{cid}/decision", json={"action": "accept"})
        response = client.post(f"/v1/candidates/{cid}/decision", json={"action": "reset"})
        assert response.json()["candidate"]["status"] == "pending"

    def test_unknown_id_is_404(self, client):
        response = client.post(
            "/v1/candidates/ffffffffffffffff/decision", json={"action": "accept"}
        )
        assert response.status_code == 404

    def test_unknown_action_is_400(self, client):
        cid = self._first_id(client)
        response = client.post(f"/v1/candidates/{cid}/decision", json={"action": "maybe"})
        assert response.status_code == 400

    def test_repeated_identical_decision_is_idempotent(self, client):
        cid = self._first_id(client)
        for _ in range(2):
            response = client.post(
                f"/v1/candidates/{cid}/decision", json={"action": "accept"}
            )
            assert response.json()["candidate"]["status"] == "accepted"


class TestBulk:
    def test_bulk_accept_level_a(self, client):
        response = client.post(
            "/v1/candidates/bulk-decision",
            json={"level": "A", "action": "accept", "reviewer": "amy"},
        )
        assert response.status_code == 200
        assert response.json()["affected"] == len(A_PAIRS)

    def test_second_bulk_affects_nothing(self, client):
        client.post("/v1/candidates/bulk-decision", json={"level": "A", "action": "accept"})
        again = client.post(
            "/v1/candidates/bulk-decision", json={"level": "A", "action": "accept"}
        )
        assert again.json()["affected"] == 0

    def test_bulk_decisions_marked_via_bulk(self, state, client):
        client.post("/v1/candidates/bulk-decision", json={"level": "C", "action": "reject"})
        replayed = state.log.replay()
        assert len(replayed) == len(C_PAIRS)
        assert all(d.via_bulk for d in replayed)

    def test_invalid_level_is_400(self, client):
        response = client.post(
            "/v1/candidates/bulk-decision", json={"level": "D", "action": "accept"}
        )
        assert response.status_code == 400

    def test_reset_not_allowed_in_bulk(self, client):
        response = client.post(
            "/v1/candidates/bulk-decision", json={"level": "A", "action": "reset"}
        )
        assert response.status_code == 400

    def test_bulk_on_level_nobody_holds_affects_nothing(self, tmp_path):
        # every graded candidate comes out A, so level B has no members
        state = make_state(tmp_path, script={"keyed": {}, "default": "A"})
        client = TestClient(create_app(state))
        response = client.post(
            "/v1/candidates/bulk-decision", json={"level": "B", "action": "accept"}
        )
        assert response.json()["affected"] == 0

    def test_bulk_equals_singles(self, tmp_path):
        bulk_state = make_state(tmp_path, log_name="bulk.log")
        single_state = make_state(tmp_path, log_name="single.log")
        bulk_state.bulk_decide("A", "accept", "amy")
        single_state.ensure_assessed()
        for candidate in sorted(single_state.candidates.values(), key=lambda c: c.id):
            if candidate.status == "pending" and candidate.level == "A":
                single_state.decide(candidate.id, "accept", "amy")
        bulk_map = {c.id: c.status for c in bulk_state.candidates.values()}
        single_map = {c.id: c.status for c in single_state.candidates.values()}
        assert bulk_map == single_map


class TestStats:
    def test_fresh_store_all_pending(self, client):
        body = client.get("/v1/stats").json()
        assert body["by_status"] == {"pending": 30, "accepted": 0, "rejected": 0}

    def test_accept_reflected(self, client):
        cid = client.get("/v1/candidates").json()["items"][0]["id"]
        client.post(f"/v1/candidates/{cid}/decision", json={"action": "accept"})
        body = client.get("/v1/stats").json()
        assert body["by_status"]["accepted"] == 1

    def test_level_counts_sum_to_assessed(self, client):
        body = client.get("/v1/stats").json()
        levels = body["by_level"]
        assessed = levels["A"] + levels["B"] + levels["C"]
        assert assessed == 29  # the no-map row has no labels to grade
        assert levels["unassessed"] == 1
        assert levels["A"] == len(A_PAIRS)
        assert levels["C"] == len(C_PAIRS)


class TestDurability:
    def test_replay_reproduces_status_map(self, tmp_path):
        state = make_state(tmp_path)
        state.ensure_assessed()
        ids = sorted(state.candidates)
        state.decide(ids[0], "accept", "amy")
        state.decide(ids[1], "reject", "amy")
        state.decide(ids[1], "reset", "amy")
        state.bulk_decide("A", "accept", "amy")
        expected = {c.id: c.status for c in state.candidates.values()}

        rebuilt = make_state(tmp_path)  # same decision log path
        got = {c.id: c.status for c in rebuilt.candidates.values()}
        assert got == expected

    def test_partial_trailing_line_ignored(self, tmp_path):
        state = make_state(tmp_path)
        ids = sorted(state.candidates)
        state.decide(ids[0], "accept", "amy")
        with open(state.log.path, "a", encoding="utf-8") as fh:
            fh.write('{"candidate_id": "abc, the power went ou')
        rebuilt = make_state(tmp_path)
        assert rebuilt.candidates[ids[0]].status == "accepted"
        assert rebuilt.decisions_total == 1

    def test_unknown_candidate_in_log_ignored(self, tmp_path):
        log = DecisionLog(str(tmp_path / "decisions.log"))
        log.append(Decision("not-a-real-id", "accept", "x", "2026-01-01T00:00:00Z"))
        state = make_state(tmp_path)
        assert all(c.status == "pending" for c in state.candidates.values())


class TestExport:
    def test_nothing_accepted_exports_nothing(self, tmp_path, state):
        out = tmp_path / "refined.nq"
        assert state.export_refined(str(out)) == 0
        assert out.read_text() == ""

    def test_two_accepted_export_fourteen_statements(self, tmp_path, state):
        ids = sorted(state.candidates)[:2]
        for cid in ids:
            state.decide(cid, "accept", "amy")
        out = tmp_path / "refined.nq"
        assert state.export_refined(str(out)) == 14
        lines = [l for l in out.read_text().splitlines() if l]
        assert len(lines) == 14
        assert all("urn:ontorag:graph:map:refined" in line for line in lines)

    def test_reexport_is_byte_identical(self, tmp_path, state):
        state.decide(sorted(state.candidates)[0], "accept", "amy")
        first = tmp_path / "a.nq"
        second = tmp_path / "b.nq"
        state.export_refined(str(first))
        state.export_refined(str(second))
        assert first.read_bytes() == second.read_bytes()

    def test_exported_nodes_are_exactly_the_accepted(self, tmp_path, state):
        state.ensure_assessed()
        state.bulk_decide("A", "accept", "amy")
        out = tmp_path / "refined.nq"
        state.export_refined(str(out))
        from ontorag.store.nquads import parse_nquads

        exported_sources = {
            q.o.value
            for q in parse_nquads(out.read_text())
            if q.p.value == "urn:ontorag:p:mapSource"
        }
        accepted_sources = {
            f"urn:ontorag:concept:{c.source.scheme}:{c.source.code}"
            for c in state.candidates.values()
            if c.status == "accepted"
        }
        assert exported_sources == accepted_sources


QUERY_ONE_PAIR = (
    'SELECT ?src ?dst WHERE { '
    'GRAPH <urn:ontorag:graph:icd9cm> { ?src <urn:ontorag:p:code> "5990" } '
    'GRAPH <urn:ontorag:graph:map:icd9cm-icd10cm> { '
    '?m <urn:ontorag:p:mapSource> ?src . ?m <urn:ontorag:p:mapTarget> ?dst } }'
)

QUERY_NO_ROWS = (
    'SELECT ?x WHERE { GRAPH <urn:ontorag:graph:icd9cm> { '
    '?c <urn:ontorag:p:code> "428" . ?c <urn:ontorag:p:broader> ?x } }'
)


class TestQueryEndpoint:
    def test_full_chain_with_assessment_and_summary(self, tmp_path):
        script = {"ordered": [QUERY_ONE_PAIR, "A", "same site", "summary text"]}
        state = make_state(tmp_path, script=script)
        client = TestClient(create_app(state))
        response = client.post("/v1/query", json={"question": "what maps to 599.0?"})
        assert response.status_code == 200
        body = response.json()
        assert body["sparql"] == QUERY_ONE_PAIR
        assert len(body["attempts"]) == 1
        assert len(body["rows"]) == 1
        assert len(body["assessments"]) == 1
        assert body["assessments"][0]["level"] == "A"
        assert body["assessments"][0]["queried_code"] == "5990"
        assert body["summary"] == "summary text"

    def test_zero_rows_skips_assessment_and_summary(self, tmp_path):
        script = {"ordered": [QUERY_NO_ROWS]}
        state = make_state(tmp_path, script=script)
        client = TestClient(create_app(state))
        response = client.post("/v1/query", json={"question": "odd"})
        body = response.json()
        assert response.status_code == 200
        assert body["rows"] == []
        assert body["assessments"] == []
        assert body["summary"] is None
        assert len(state.provider.transcript) == 1  # no grading calls happened

    def test_exhausted_attempts_is_422_with_trace(self, tmp_path):
        script = {"ordered": ["junk"] * 5}
        state = make_state(tmp_path, script=script)
        client = TestClient(create_app(state))
        response = client.post("/v1/query", json={"question": "q"})
        assert response.status_code == 422
        assert len(response.json()["detail"]["attempts"]) == 5

    def test_provider_failure_is_502(self, tmp_path):
        state = make_state(tmp_path, script={"ordered": []})
        client = TestClient(create_app(state))
        response = client.post("/v1/query", json={"question": "q"})
        assert response.status_code == 502

    def test_ask_query_returns_boolean(self, tmp_path):
        ask = ('ASK { GRAPH <urn:ontorag:graph:icd9cm> { '
               '?c <urn:ontorag:p:code> "5849" } }')
        state = make_state(tmp_path, script={"ordered": [ask]})
        client = TestClient(create_app(state))
        body = client.post("/v1/query", json={"question": "is 584.9 known?"}).json()
        assert body["boolean"] is True
        assert body["rows"] == []
        assert body["assessments"] == []
