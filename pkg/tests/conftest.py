import json
from pathlib import Path

import pytest

from ontorag.ingest import SourceManifest, ingest, manifest_from_dict
from ontorag.llm import ChatMessage, MockScript, ScriptedMockProvider, fingerprint
from ontorag.store.engine import QuadStore

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def icd9_text() -> str:
    return (FIXTURES / "icd9_codes.txt").read_text()


@pytest.fixture
def icd10_xml() -> str:
    return (FIXTURES / "icd10_codes.xml").read_text()


@pytest.fixture
def gem_text() -> str:
    return (FIXTURES / "gem_rows.txt").read_text()


def make_manifest() -> SourceManifest:
    data = json.loads((FIXTURES / "manifest.json").read_text())
    manifest = manifest_from_dict(data)
    for entry in manifest.entries:
        entry.path = str(FIXTURES / entry.path)
    return manifest


@pytest.fixture
def manifest() -> SourceManifest:
    return make_manifest()


def build_fixture_store() -> tuple[QuadStore, object]:
    store = QuadStore()
    report = ingest(make_manifest(), store)
    return store, report


@pytest.fixture
def fixture_store() -> QuadStore:
    store, report = build_fixture_store()
    assert report.dangling_refs == []
    return store


def ordered_mock(responses: list[str]) -> ScriptedMockProvider:
    return ScriptedMockProvider(MockScript(ordered=list(responses)))


def keyed_mock(mapping: dict[str, str], default: str | None = None) -> ScriptedMockProvider:
    return ScriptedMockProvider(MockScript(keyed=dict(mapping), default_response=default))


def prompt_fingerprint(prompt: str) -> str:
    return fingerprint([ChatMessage("user", prompt)])
