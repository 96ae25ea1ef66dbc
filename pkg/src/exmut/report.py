"""Serialise engine and comparison results.

Formats: a JSON document (with a bundled JSON Schema), an XML view of the
same tree, a tab-separated list of weakly tested functions, a CSV
comparison table and a self-contained HTML summary.
"""

from __future__ import annotations

import csv
import html
import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

from .analysis import correlate, format_score, round_score, status_histogram
from .errors import DegenerateInput
from .model import (
    Classification,
    ComparisonReport,
    Engine,
    EngineReport,
    EngineTotals,
    FunctionSite,
    FunctionSummary,
    Mutant,
    MutantOutcome,
    MutantStatus,
    ReturnCategory,
    SiteFlag,
    Span,
)

SCHEMA_VERSION = "1.0"

PathLike = Union[str, Path]


def load_schema() -> dict:
    text = resources.files("exmut").joinpath("schema/report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


# --------------------------------------------------------------------------
# JSON

_SCORE_TAG = "\x00score:"
_SCORE_RE = re.compile(r'"\\u0000score:([0-9.]+)"')


def _score(value: Optional[Fraction]) -> Any:
    return None if value is None else f"{_SCORE_TAG}{round_score(value)}"


def _dumps(doc: dict) -> str:
    # scores are tagged strings until here so they print with exactly 2 decimals
    return _SCORE_RE.sub(r"\1", json.dumps(doc, indent=2, ensure_ascii=False)) + "\n"


def _totals_dict(t: EngineTotals) -> dict:
    return {"created": t.created, "covered": t.covered, "killed": t.killed, "score": _score(t.score)}


def engine_report_to_dict(report: EngineReport) -> dict:
    outcomes = {o.mutant_id: o for o in report.outcomes}
    functions = []
    for site in report.sites:
        summary = report.per_function[site.id]
        mutants = [m for m in report.mutants if m.site.id == site.id]
        functions.append({
            "id": site.id,
            "file": site.file,
            "line": site.line,
            "first_line": site.first_line,
            "category": site.category.value,
            "return_annotation": site.return_annotation,
            "flags": sorted(f.value for f in site.flags),
            "body_span": [site.body_span.start, site.body_span.end],
            "signature_span": [site.signature_span.start, site.signature_span.end],
            "classification": summary.classification.value,
            "excluded_reason": report.excluded[site.id].value if site.id in report.excluded else None,
            "created": summary.created,
            "covered": summary.covered,
            "killed": summary.killed,
            "mutants": [
                {
                    "mutant_id": m.mutant_id,
                    "op_id": m.op_id,
                    "line": m.line,
                    "span": [m.affected_span.start, m.affected_span.end],
                    "replacement": m.replacement,
                    "status": outcomes[m.mutant_id].status.value,
                    "killing_tests": list(outcomes[m.mutant_id].killing_tests),
                }
                for m in mutants
            ],
        })
    hist = status_histogram(report.outcomes)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "engine",
        "engine": report.engine.value,
        "project_digest": report.project_digest,
        "coverage_precision": report.coverage_precision,
        "totals": {
            "created": report.mutants_created,
            "covered": report.mutants_covered,
            "killed": report.mutants_killed,
            "score": _score(report.score_percent),
        },
        "statuses": {s.value: hist[s] for s in MutantStatus},
        "functions": functions,
        "parse_failures": list(report.parse_failures),
        "timings": {
            "total_wall_time_ms": report.total_wall_time_ms,
            "baseline_wall_time_ms": report.baseline_wall_time_ms,
            "mutants": {o.mutant_id: o.wall_time_ms for o in report.outcomes},
        },
    }


def comparison_to_dict(cmp: ComparisonReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "comparison",
        "engine": "both",
        "project_digest": cmp.project_digest,
        "intersected_function_ids": sorted(cmp.intersected_function_ids),
        "extreme": _totals_dict(cmp.extreme),
        "traditional": _totals_dict(cmp.traditional),
        "spearman_rho": cmp.spearman_rho,
        "p_value": cmp.p_value,
        "per_project_pairs": [
            {"project": label, "extreme_score": x, "traditional_score": y} for label, x, y in cmp.per_project_pairs
        ],
    }


def to_dict(report: Union[EngineReport, ComparisonReport]) -> dict:
    if isinstance(report, EngineReport):
        return engine_report_to_dict(report)
    return comparison_to_dict(report)


def render_json(report: Union[EngineReport, ComparisonReport]) -> str:
    return _dumps(to_dict(report))


def emit_json(report: Union[EngineReport, ComparisonReport], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_json(report), encoding="utf-8")
    return path


def _span(pair: Sequence[int]) -> Span:
    return Span(int(pair[0]), int(pair[1]))


def _totals_from(d: dict) -> EngineTotals:
    return EngineTotals(d["created"], d["covered"], d["killed"])


def report_from_dict(doc: dict) -> Union[EngineReport, ComparisonReport]:
    """Inverse of :func:`to_dict` (scores are recomputed from the counts)."""
    if doc.get("kind") == "comparison":
        return ComparisonReport(
            project_digest=doc["project_digest"],
            intersected_function_ids=frozenset(doc["intersected_function_ids"]),
            extreme=_totals_from(doc["extreme"]),
            traditional=_totals_from(doc["traditional"]),
            spearman_rho=doc["spearman_rho"],
            p_value=doc["p_value"],
            per_project_pairs=tuple((p["project"], p["extreme_score"], p["traditional_score"])
                                    for p in doc["per_project_pairs"]),
        )
    times = doc["timings"]["mutants"]
    sites, mutants, outcomes = [], [], []
    per_function, excluded = {}, {}
    for f in doc["functions"]:
        site = FunctionSite(
            id=f["id"], file=f["file"], body_span=_span(f["body_span"]), signature_span=_span(f["signature_span"]),
            category=ReturnCategory(f["category"]), flags=frozenset(SiteFlag(x) for x in f["flags"]),
            line=f["line"], first_line=f["first_line"], return_annotation=f["return_annotation"],
        )
        sites.append(site)
        if f["excluded_reason"] is not None:
            excluded[site.id] = SiteFlag(f["excluded_reason"])
        per_function[site.id] = FunctionSummary(f["created"], f["covered"], f["killed"],
                                                Classification(f["classification"]))
        for m in f["mutants"]:
            mutants.append(Mutant(m["mutant_id"], site, m["op_id"], m["replacement"], _span(m["span"]), m["line"]))
            outcomes.append(MutantOutcome(m["mutant_id"], MutantStatus(m["status"]), tuple(m["killing_tests"]),
                                          int(times.get(m["mutant_id"], 0))))
    totals = doc["totals"]
    return EngineReport(
        engine=Engine(doc["engine"]),
        project_digest=doc["project_digest"],
        sites=tuple(sites),
        excluded=excluded,
        mutants=tuple(mutants),
        outcomes=tuple(outcomes),
        per_function=per_function,
        mutants_created=totals["created"],
        mutants_covered=totals["covered"],
        mutants_killed=totals["killed"],
        total_wall_time_ms=doc["timings"]["total_wall_time_ms"],
        baseline_wall_time_ms=doc["timings"]["baseline_wall_time_ms"],
        coverage_precision=doc["coverage_precision"],
        parse_failures=tuple(doc["parse_failures"]),
    )


def read_json(path: PathLike) -> Union[EngineReport, ComparisonReport]:
    return report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --------------------------------------------------------------------------
# XML

def _xml_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str) and value.startswith(_SCORE_TAG):
        return value[len(_SCORE_TAG):]
    return str(value)


def _to_element(tag: str, value: Any) -> ET.Element:
    el = ET.Element(tag)
    if isinstance(value, dict):
        for k, v in value.items():
            if isinstance(v, list) and v and all(isinstance(i, int) for i in v):
                el.set(k, " ".join(map(str, v)))
            elif isinstance(v, (dict, list)):
                el.append(_to_element(k, v))
            else:
                el.set(k, _xml_value(v))
    elif isinstance(value, list):
        child_tag = {"functions": "function", "mutants": "mutant"}.get(tag, "item")
        for item in value:
            if isinstance(item, (dict, list)):
                el.append(_to_element(child_tag, item))
            else:
                sub = ET.SubElement(el, child_tag)
                sub.text = _xml_value(item)
    else:
        el.text = _xml_value(value)
    return el


def render_xml(report: Union[EngineReport, ComparisonReport]) -> str:
    root = _to_element("report", to_dict(report))
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def emit_xml(report: Union[EngineReport, ComparisonReport], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_xml(report), encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# method list

_LIST_ORDER = {Classification.PSEUDO_TESTED: 0, Classification.PARTIALLY_TESTED: 1}


def render_method_list(report: EngineReport) -> str:
    """One line per pseudo- or partially-tested function.

    ``<classification>\\t<id>\\t<file>:<line>\\t<killed>/<covered>``
    """
    by_id = {s.id: s for s in report.sites}
    rows = [(s, report.per_function[s.id]) for s in report.sites
            if report.per_function[s.id].classification in _LIST_ORDER]
    rows.sort(key=lambda r: (_LIST_ORDER[r[1].classification], r[0].id))
    lines = [
        f"{summary.classification.value}\t{site.id}\t{by_id[site.id].file}:{site.line}\t{summary.killed}/{summary.covered}"
        for site, summary in rows
    ]
    return "".join(line + "\n" for line in lines)


def emit_method_list(report: EngineReport, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_method_list(report), encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# comparison table

CSV_HEADER = (
    "project", "extreme_time", "extreme_created", "extreme_covered", "extreme_killed", "extreme_score",
    "trad_time", "trad_created", "trad_covered", "trad_killed", "trad_score",
)
FOOTER_TAG = "spearman_rho"


def format_duration(ms: int) -> str:
    """``H:MM:SS.mmm``, the time format of the comparison table."""
    seconds, millis = divmod(int(ms), 1000)
    minutes, sec = divmod(seconds, 60)
    hours, minutes = divmod(minutes, 60)
    return f"{hours}:{minutes:02d}:{sec:02d}.{millis:03d}"


def parse_duration(text: str) -> int:
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise ValueError(f"bad duration {text!r}")
    h, m, s = int(parts[0]), int(parts[1]), Decimal(parts[2])
    return int((h * 3600 + m * 60) * 1000 + s * 1000)


@dataclass(frozen=True)
class ProjectRow:
    """One line of the comparison table.

    Created counts are whole-engine; covered/killed/score are restricted to
    functions both engines mutated.
    """

    project: str
    extreme_time_ms: int
    extreme_created: int
    extreme_covered: int
    extreme_killed: int
    extreme_score: Optional[Decimal]
    trad_time_ms: int
    trad_created: int
    trad_covered: int
    trad_killed: int
    trad_score: Optional[Decimal]

    @classmethod
    def from_reports(cls, project: str, cmp: ComparisonReport, extreme: EngineReport,
                     traditional: EngineReport) -> ProjectRow:
        def score(t: EngineTotals) -> Optional[Decimal]:
            return None if t.score is None else round_score(t.score)

        return cls(
            project,
            extreme.total_wall_time_ms, extreme.mutants_created, cmp.extreme.covered, cmp.extreme.killed,
            score(cmp.extreme),
            traditional.total_wall_time_ms, traditional.mutants_created, cmp.traditional.covered,
            cmp.traditional.killed, score(cmp.traditional),
        )

    def cells(self) -> list[str]:
        return [
            self.project,
            format_duration(self.extreme_time_ms), str(self.extreme_created), str(self.extreme_covered),
            str(self.extreme_killed), format_score(self.extreme_score),
            format_duration(self.trad_time_ms), str(self.trad_created), str(self.trad_covered),
            str(self.trad_killed), format_score(self.trad_score),
        ]

    @classmethod
    def from_cells(cls, cells: Sequence[str]) -> ProjectRow:
        def score(text: str) -> Optional[Decimal]:
            return None if text.strip().lower() in ("", "n/a", "na") else Decimal(text)

        return cls(
            cells[0],
            parse_duration(cells[1]), int(cells[2]), int(cells[3]), int(cells[4]), score(cells[5]),
            parse_duration(cells[6]), int(cells[7]), int(cells[8]), int(cells[9]), score(cells[10]),
        )

    @property
    def score_pair(self) -> Optional[tuple[float, float]]:
        if self.extreme_score is None or self.trad_score is None:
            return None
        return float(self.extreme_score), float(self.trad_score)


def table_correlation(rows: Iterable[ProjectRow], *, exact: bool = False) -> tuple[Optional[float], Optional[float]]:
    """Spearman rho and p over rows with both scores defined, ``None`` where undefined."""
    pairs = [r.score_pair for r in rows if r.score_pair is not None]
    try:
        return correlate(pairs, exact=exact)
    except DegenerateInput:
        return None, None


def render_comparison_table(rows: Sequence[ProjectRow], *, exact_p: bool = False) -> str:
    if not rows:
        raise ValueError("comparison table needs at least one row")
    rho, p = table_correlation(rows, exact=exact_p)

    class _Buf(list):
        def write(self, s: str) -> None:
            self.append(s)

    buf = _Buf()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.cells())
    footer = [FOOTER_TAG, "NA" if rho is None else f"{rho:.4f}", "p_value", "NA" if p is None else f"{p:.4g}"]
    writer.writerow(footer + [""] * (len(CSV_HEADER) - len(footer)))
    return "".join(buf)


def emit_comparison_table(rows: Sequence[ProjectRow], path: PathLike, *, exact_p: bool = False) -> Path:
    path = Path(path)
    text = render_comparison_table(rows, exact_p=exact_p)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def read_comparison_table(path: PathLike) -> tuple[list[ProjectRow], dict[str, Optional[float]]]:
    """Rows and footer (``spearman_rho``, ``p_value``) of a comparison CSV."""
    rows: list[ProjectRow] = []
    footer: dict[str, Optional[float]] = {"spearman_rho": None, "p_value": None}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ValueError(f"{path}: not a comparison table (header mismatch)")
        for cells in reader:
            if not cells or not any(cells):
                continue
            if cells[0] == FOOTER_TAG:
                footer["spearman_rho"] = None if cells[1] == "NA" else float(cells[1])
                footer["p_value"] = None if cells[3] == "NA" else float(cells[3])
                continue
            rows.append(ProjectRow.from_cells(cells))
    return rows, footer


# --------------------------------------------------------------------------
# HTML

_CSS = """
body { font-family: sans-serif; margin: 2em; color: #222; }
table { border-collapse: collapse; margin: 1em 0; }
td, th { border: 1px solid #bbb; padding: 0.25em 0.6em; text-align: left; }
th { background: #eee; }
.bar { background: #4a7ab5; height: 0.9em; display: inline-block; }
"""


def _scatter_svg(points: Sequence[tuple[str, float, float]], size: int = 320) -> str:
    pad = 40
    span = size - 2 * pad

    def sx(v: float) -> float:
        return pad + span * v / 100

    def sy(v: float) -> float:
        return size - pad - span * v / 100

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" class="scatter">',
             f'<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" stroke="#888"/>',
             f'<text x="{size / 2}" y="{size - 8}" text-anchor="middle" font-size="12">extreme score</text>',
             f'<text x="12" y="{size / 2}" font-size="12" transform="rotate(-90 12 {size / 2})" '
             f'text-anchor="middle">traditional score</text>']
    for label, x, y in points:
        parts.append(f'<circle class="point" cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="4" fill="#c0392b">'
                     f'<title>{html.escape(label)}: {x:.2f} / {y:.2f}</title></circle>')
    parts.append("</svg>")
    return "".join(parts)


def render_html_summary(report: Union[EngineReport, ComparisonReport],
                        rows: Sequence[ProjectRow] = ()) -> str:
    esc = html.escape
    body: list[str] = []
    if isinstance(report, EngineReport):
        score = report.score_percent
        body.append(f"<h1>Mutation report: {esc(report.engine.value)} engine</h1>")
        body.append("<table><tr><th>created</th><th>covered</th><th>detected</th><th>score</th></tr>"
                    f"<tr><td>{report.mutants_created}</td><td>{report.mutants_covered}</td>"
                    f"<td>{report.mutants_killed}</td>"
                    f"<td class=\"score\">{format_score(score) if score is not None else 'no covered mutants'}</td></tr></table>")
        counts = {c: 0 for c in Classification}
        for summary in report.per_function.values():
            counts[summary.classification] += 1
        top = max(counts.values()) or 1
        body.append("<h2>Functions by classification</h2><table>")
        for c, n in counts.items():
            body.append(f"<tr><td>{c.value}</td><td>{n}</td>"
                        f"<td><span class=\"bar\" style=\"width:{200 * n // top}px\"></span></td></tr>")
        body.append("</table>")
        weak = render_method_list(report).splitlines()
        if weak:
            body.append("<h2>Weakly tested functions</h2><table><tr><th>classification</th><th>function</th>"
                        "<th>location</th><th>detected/covered</th></tr>")
            for line in weak:
                body.append("<tr>" + "".join(f"<td>{esc(c)}</td>" for c in line.split("\t")) + "</tr>")
            body.append("</table>")
    else:
        body.append("<h1>Engine comparison</h1>")
        body.append("<table><tr><th></th><th>covered</th><th>detected</th><th>score</th></tr>")
        for name, t in (("extreme", report.extreme), ("traditional", report.traditional)):
            s = format_score(t.score) if t.score is not None else "no covered mutants"
            body.append(f"<tr><td>{name}</td><td>{t.covered}</td><td>{t.killed}</td><td class=\"score\">{s}</td></tr>")
        body.append("</table>")
        body.append(f"<p>{len(report.intersected_function_ids)} functions mutated by both engines.</p>")
        if report.spearman_rho is not None:
            p = "n/a" if report.p_value is None else f"{report.p_value:.4g}"
            body.append(f"<p>Spearman rho = {report.spearman_rho:.4f}, p = {p}</p>")

    points = [(r.project, float(r.extreme_score), float(r.trad_score)) for r in rows if r.score_pair]
    if not points and isinstance(report, ComparisonReport):
        points = [(label, float(x), float(y)) for label, x, y in report.per_project_pairs
                  if x is not None and y is not None]
    if points:
        body.append("<h2>Score correlation</h2>")
        body.append(_scatter_svg(points))
        if rows:
            rho, p = table_correlation(rows)
        elif isinstance(report, ComparisonReport):
            rho, p = report.spearman_rho, report.p_value
        else:
            rho = p = None
        if rho is not None:
            body.append(f"<p>Spearman rho = {rho:.4f}" + (f", p = {p:.4g}" if p is not None else "") + "</p>")
    return ("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>exmut report</title>"
            f"<style>{_CSS}</style></head><body>\n" + "\n".join(body) + "\n</body></html>\n")


def emit_html_summary(report: Union[EngineReport, ComparisonReport], path: PathLike,
                      rows: Sequence[ProjectRow] = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_html_summary(report, rows), encoding="utf-8")
    return path
