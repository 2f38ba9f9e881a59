"""
Shared fixtures for the genescan test suite.
"""

import json
from pathlib import Path
from typing import Callable, Dict

import pytest

from genescan.backend.config import DEFAULT_SIGNATURE_DIR
from genescan.backend.engine.agnostic_graph import AgnosticGraph
from genescan.backend.engine.blocking import BlockGraph, extract_blocks
from genescan.backend.engine.canonicalize import load_default_rules
from genescan.backend.engine.ingest import ModelSource, load_model
from genescan.backend.engine.signature_db import FamilySignature, load_signature_path, parse_signatures
from tests.fixtures.make_onnx_fixtures import write_onnx_fixtures


FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURE_DIR / f"{name}.json"


def load_fixture_document(name: str) -> Dict:
    return json.loads(fixture_path(name).read_text(encoding="utf-8"))


def graph_from_document(document: Dict, origin: str = "doc.json") -> AgnosticGraph:
    return load_model(ModelSource.from_bytes(json.dumps(document).encode("utf-8"), origin=origin))


@pytest.fixture
def load_graph() -> Callable[[str], AgnosticGraph]:
    """Agnostic graph of a JSON fixture by name"""
    def _load(name: str) -> AgnosticGraph:
        return load_model(ModelSource.from_path(fixture_path(name)))
    return _load


@pytest.fixture
def load_blocks(load_graph) -> Callable[[str], BlockGraph]:
    def _load(name: str) -> BlockGraph:
        return extract_blocks(load_graph(name))
    return _load


@pytest.fixture(scope="session")
def signature_db() -> list:
    """The shipped signature database"""
    return load_signature_path(DEFAULT_SIGNATURE_DIR)


@pytest.fixture(scope="session")
def family(signature_db) -> Callable[[str], FamilySignature]:
    by_name = {sig.name: sig for sig in signature_db}
    return lambda name: by_name[name]


@pytest.fixture(scope="session")
def default_rules():
    return load_default_rules()


@pytest.fixture(scope="session")
def onnx_fixtures(tmp_path_factory) -> Dict[str, Path]:
    """ONNX fixtures written once per session"""
    return write_onnx_fixtures(tmp_path_factory.mktemp("onnx"))


@pytest.fixture
def single_family() -> Callable[[Dict], FamilySignature]:
    """Parse one single-component family from a dict"""
    def _parse(component: Dict, name: str = "Test") -> FamilySignature:
        return parse_signatures(json.dumps({name: component}))[0]
    return _parse


@pytest.fixture(autouse=True)
def _isolated_environment(monkeypatch):
    """Keep GENESCAN_* variables from the developer's shell out of the tests"""
    for variable in ("GENESCAN_SIGS", "GENESCAN_RULES", "GENESCAN_JOBS", "GENESCAN_LOG_LEVEL"):
        monkeypatch.delenv(variable, raising=False)
    from genescan.backend import config, services, utils
    monkeypatch.setattr(config, "config", None)
    monkeypatch.setattr(services, "_scan_service", None)
    monkeypatch.setattr(utils, "_log_level", "error")
