from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET

import jsonschema
import pytest

from conftest import SCORE_TABLE
from exmut.analysis import build_engine_report, intersect_reports, spearman_rho, with_correlation
from exmut.model import Engine
from exmut.report import (
    CSV_HEADER,
    ProjectRow,
    emit_comparison_table,
    emit_html_summary,
    emit_json,
    emit_method_list,
    emit_xml,
    format_duration,
    load_schema,
    parse_duration,
    read_comparison_table,
    read_json,
    render_html_summary,
    render_json,
    render_method_list,
)


@pytest.fixture(scope="module")
def schema():
    return load_schema()


def test_engine_json_validates_and_keeps_counts(corpus_run, schema, tmp_path):
    for name, reports in corpus_run.reports.items():
        for engine, report in reports.items():
            path = emit_json(report, tmp_path / f"{name}-{engine.value}.json")
            doc = json.loads(path.read_text())
            jsonschema.validate(doc, schema)
            assert doc["totals"]["created"] == report.mutants_created
            assert doc["totals"]["covered"] == report.mutants_covered
            assert doc["totals"]["killed"] == report.mutants_killed
            back = read_json(path)
            assert [o.status for o in back.outcomes] == [o.status for o in report.outcomes]


def test_json_layout(corpus_run, tmp_path):
    report = corpus_run.reports["xmlchars"][Engine.EXTREME]
    text = emit_json(report, tmp_path / "r.json").read_text()
    doc = json.loads(text)
    assert list(doc) == ["schema_version", "kind", "engine", "project_digest", "coverage_precision", "totals",
                         "statuses", "functions", "parse_failures", "timings"]
    assert re.search(r'"score": 50\.00\b', text)
    fn = next(f for f in doc["functions"] if f["id"] == "xmlchars.isValidXmlChar")
    assert list(fn)[:3] == ["id", "file", "line"]
    assert {m["status"] for m in fn["mutants"]} == {"SURVIVED"}
    assert set(doc["timings"]["mutants"]) == {o.mutant_id for o in report.outcomes}


def test_undefined_score_is_null(schema):
    empty = build_engine_report(Engine.EXTREME, "d", [], [], [], [])
    doc = json.loads(render_json(empty))
    assert doc["totals"]["score"] is None
    jsonschema.validate(doc, schema)


def test_comparison_json_validates(corpus_run, schema, tmp_path):
    reports = corpus_run.reports["accounts"]
    cmp = intersect_reports(reports[Engine.EXTREME], reports[Engine.TRADITIONAL_LITE])
    cmp = with_correlation(cmp, [("a", 1.0, 2.0), ("b", 2.0, 1.0), ("c", 3.0, 3.0), ("d", 4.0, 5.0)])
    doc = json.loads(emit_json(cmp, tmp_path / "c.json").read_text())
    jsonschema.validate(doc, schema)
    back = read_json(tmp_path / "c.json")
    assert back.extreme == cmp.extreme and back.traditional == cmp.traditional
    assert back.spearman_rho == pytest.approx(cmp.spearman_rho)


def test_xml_view(corpus_run, tmp_path):
    report = corpus_run.reports["accounts"][Engine.EXTREME]
    root = ET.parse(emit_xml(report, tmp_path / "r.xml")).getroot()
    totals = root.find("totals")
    assert int(totals.get("created")) == report.mutants_created
    assert len(root.findall("./functions/function")) == len(report.sites)
    assert len(root.findall(".//mutant")) == report.mutants_created


def test_method_list(corpus_run, tmp_path):
    xml = corpus_run.reports["xmlchars"][Engine.EXTREME]
    lines = emit_method_list(xml, tmp_path / "m.txt").read_text().splitlines()
    assert lines == ["PSEUDO_TESTED\txmlchars.isValidXmlChar\txmlchars.py:4\t0/2"]
    assert render_method_list(corpus_run.reports["factorial"][Engine.EXTREME]) == ""
    accounts = render_method_list(corpus_run.reports["accounts"][Engine.EXTREME]).splitlines()
    kinds = [line.split("\t")[0] for line in accounts]
    assert kinds == sorted(kinds, key=lambda k: k != "PSEUDO_TESTED")
    ids = [line.split("\t")[1] for line in accounts]
    for kind in set(kinds):
        group = [i for i, k in zip(ids, kinds) if k == kind]
        assert group == sorted(group)
    assert "PARTIALLY_TESTED" in kinds


def test_durations():
    assert format_duration(0) == "0:00:00.000"
    assert format_duration(3600_000 * 56 + 47 * 60_000 + 57_000) == "56:47:57.000"
    assert parse_duration("2:24:55.5") == 8695500
    assert parse_duration(format_duration(123456789)) == 123456789


def _row(corpus_run, name):
    reports = corpus_run.reports[name]
    cmp = intersect_reports(reports[Engine.EXTREME], reports[Engine.TRADITIONAL_LITE])
    return ProjectRow.from_reports(name, cmp, reports[Engine.EXTREME], reports[Engine.TRADITIONAL_LITE])


def test_comparison_table_one_row(corpus_run, tmp_path):
    row = _row(corpus_run, "xmlchars")
    text = emit_comparison_table([row], tmp_path / "t.csv").read_text().splitlines()
    assert text[0] == ",".join(CSV_HEADER)
    assert len(text) == 3
    assert text[2].startswith("spearman_rho,NA,p_value,NA")
    rows, footer = read_comparison_table(tmp_path / "t.csv")
    assert rows == [row]
    assert footer == {"spearman_rho": None, "p_value": None}
    with pytest.raises(ValueError):
        emit_comparison_table([], tmp_path / "empty.csv")
    assert not (tmp_path / "empty.csv").exists()


def test_score_table_round_trip(tmp_path):
    rows, _ = read_comparison_table(SCORE_TABLE)
    path = emit_comparison_table(rows, tmp_path / "t3.csv")
    again, footer = read_comparison_table(path)
    assert again == rows
    rho = spearman_rho([(float(r.extreme_score), float(r.trad_score)) for r in again])
    assert abs(rho - 0.60) <= 0.02
    assert footer["spearman_rho"] == pytest.approx(rho, abs=1e-4)
    assert 0.001 <= footer["p_value"] <= 0.01


def test_html(corpus_run, tmp_path):
    report = corpus_run.reports["xmlchars"][Engine.EXTREME]
    page = emit_html_summary(report, tmp_path / "r.html").read_text()
    assert "50.00" in page
    assert "PSEUDO_TESTED" in page
    assert not re.search(r"<(script|link|img)[^>]*(src|href)=", page)

    rows, _ = read_comparison_table(SCORE_TABLE)
    reports = corpus_run.reports["xmlchars"]
    cmp = intersect_reports(reports[Engine.EXTREME], reports[Engine.TRADITIONAL_LITE])
    page = render_html_summary(cmp, rows)
    assert page.count('class="point"') == len(rows) == 21
    assert "Spearman rho = 0.6052" in page

    empty = build_engine_report(Engine.EXTREME, "d", [], [], [], [])
    assert "no covered mutants" in render_html_summary(empty)
