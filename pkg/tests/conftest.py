from __future__ import annotations

import json
import shutil
import textwrap
import time
from dataclasses import dataclass
from pathlib import Path

import pytest

from exmut.cli import load_config
from exmut.executor import PytestRunner, run_engine
from exmut.model import Engine, EngineReport

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"
SCORE_TABLE = FIXTURES / "score_table.csv"

CORPUS_PROJECTS = sorted(p.name for p in CORPUS.iterdir() if (p / "expected.json").is_file())

ACCEPTANCE_LABELS = {
    "test_ac1_operator_catalog": "AC1 operator catalog matches the payload table",
    "test_ac2_listing_reproduction": "AC2 factorial mutants match the worked listings",
    "test_ac3_pseudo_tested_detection": "AC3 corpus classification agrees 100% with planted labels",
    "test_ac4_score_arithmetic": "AC4 42 reference scores reproduced to 2 decimals",
    "test_ac5_correlation": "AC5 Spearman rho/p on the reference score table, exact-permutation cross-check",
    "test_ac6_efficiency_ordering": "AC6 extreme creates fewer mutants and runs faster on every project",
    "test_ac7_invariant_suite": "AC7 property-based invariant suite",
    "test_ac8_determinism": "AC8 repeated runs give identical JSON outside timings",
}

_acceptance_results: dict[str, str] = {}


def make_project(root: Path, files: dict[str, str]) -> Path:
    """Write a throwaway project; ``files`` maps relative paths to dedented source."""
    for rel, text in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(textwrap.dedent(text).lstrip("\n"), encoding="utf-8")
    return root


@pytest.fixture
def fast_runner():
    return PytestRunner(plugin_autoload=False)


def copy_fixture(name: str, dest: Path) -> Path:
    target = dest / name
    shutil.copytree(CORPUS / name, target)
    return target


def project_config(root: Path):
    return load_config(["run", str(root)])


def expected_labels(name: str) -> dict[str, str]:
    return json.loads((CORPUS / name / "expected.json").read_text())


@dataclass
class CorpusRun:
    reports: dict[str, dict[Engine, EngineReport]]
    elapsed_s: float


@pytest.fixture(scope="session")
def corpus_run() -> CorpusRun:
    """Both engines over every corpus project, run once per session."""
    started = time.perf_counter()
    reports: dict[str, dict[Engine, EngineReport]] = {}
    for name in CORPUS_PROJECTS:
        root = CORPUS / name
        ecfg = project_config(root).engine_config()
        reports[name] = {engine: run_engine(root, engine, ecfg) for engine in Engine}
    return CorpusRun(reports, time.perf_counter() - started)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1].split("[", 1)[0]
    if name not in ACCEPTANCE_LABELS:
        return
    if report.when == "call" or report.outcome != "passed":
        previous = _acceptance_results.get(name)
        if previous != "FAIL":
            _acceptance_results[name] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, label in ACCEPTANCE_LABELS.items():
        if name in _acceptance_results:
            terminalreporter.write_line(f"{_acceptance_results[name]}  {label}")
