"""Command-line entry point: ``exmut run`` and ``exmut compare``.

Settings come from command-line flags, then ``exmut.toml`` at the project
root (or ``--config``), then built-in defaults.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Sequence, TextIO

from .analysis import format_score, intersect_reports, with_correlation
from .discovery import DEFAULT_EXCLUDE_GLOBS, DiscoveryConfig
from .errors import ConfigError, ExmutError
from .executor import EngineConfig, PytestRunner, TimeoutPolicy, run_engine
from .model import Classification, ComparisonReport, Engine, EngineReport
from .operators import ALL_OPERATOR_IDS
from .report import (
    ProjectRow,
    emit_comparison_table,
    emit_html_summary,
    emit_json,
    emit_method_list,
    emit_xml,
    read_comparison_table,
    table_correlation,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("exmut")

CONFIG_FILE = "exmut.toml"
ENGINES = ("extreme", "traditional", "both")
FORMATS = ("json", "csv", "html", "method-list", "xml")
DEFAULT_FORMATS = frozenset({"json", "method-list"})
MIN_ROWS_FOR_CORRELATION = 4

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PSEUDO_TESTED = 2


class _ParserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage, which is reserved here
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _ParserError(message)


@dataclass(frozen=True)
class RunConfig:
    project_root: Path
    engine: str = "extreme"
    operators: Optional[frozenset[str]] = None
    excludes: tuple[str, ...] = ()
    timeout_factor: float = 2.0
    timeout_constant_ms: int = 4000
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)
    report_dir: Optional[Path] = None
    formats: frozenset[str] = DEFAULT_FORMATS
    keep_workspaces: bool = False
    exact_p: bool = False
    fail_on_pseudo_tested: bool = False
    append_to: Optional[Path] = None
    label: Optional[str] = None
    plugin_autoload: bool = True
    roots: tuple[str, ...] = (".",)
    include_globs: tuple[str, ...] = ("**/*.py",)
    exclude_globs: tuple[str, ...] = DEFAULT_EXCLUDE_GLOBS
    pytest_args: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.engine not in ENGINES:
            raise ConfigError("engine", f"must be one of {', '.join(ENGINES)}, got {self.engine!r}")
        if self.jobs < 1:
            raise ConfigError("jobs", f"must be >= 1, got {self.jobs}")
        if self.timeout_factor < 1:
            raise ConfigError("timeout_factor", f"must be >= 1, got {self.timeout_factor}")
        if self.timeout_constant_ms < 0:
            raise ConfigError("timeout_constant_ms", f"must be >= 0, got {self.timeout_constant_ms}")
        unknown = sorted(set(self.formats) - set(FORMATS))
        if unknown:
            raise ConfigError("formats", f"unknown format(s): {', '.join(unknown)}")
        if self.operators is not None:
            bad = sorted(set(self.operators) - ALL_OPERATOR_IDS)
            if bad:
                raise ConfigError("operators", f"unknown operator id(s): {', '.join(bad)}")

    @property
    def reports(self) -> Path:
        return self.report_dir if self.report_dir is not None else self.project_root / "exmut-reports"

    @property
    def project_label(self) -> str:
        return self.label or self.project_root.name

    def engine_config(self) -> EngineConfig:
        reports = self.reports.resolve()
        root = self.project_root.resolve()
        ignore = (reports,) if reports.is_relative_to(root) else ()
        return EngineConfig(
            discovery=DiscoveryConfig(
                project_root=self.project_root,
                roots=self.roots,
                include_globs=self.include_globs,
                exclude_globs=self.exclude_globs,
                excluded_function_patterns=self.excludes,
            ),
            operators=self.operators,
            timeout=TimeoutPolicy(self.timeout_factor, self.timeout_constant_ms),
            jobs=self.jobs,
            runner=PytestRunner(roots=self.roots, pytest_args=self.pytest_args, plugin_autoload=self.plugin_autoload),
            keep_workspaces=self.keep_workspaces,
            ignore_paths=ignore,
        )


_FIELDS = {f.name for f in fields(RunConfig)} - {"project_root"}
_ALIASES = {"exclude": "excludes", "format": "formats"}
_SEQUENCE_KEYS = {"operators", "excludes", "formats", "roots", "include_globs", "exclude_globs", "pytest_args"}
_PATH_KEYS = {"report_dir", "append_to"}
_TYPES: dict[str, type] = {
    "engine": str, "timeout_factor": float, "timeout_constant_ms": int, "jobs": int,
    "keep_workspaces": bool, "exact_p": bool, "fail_on_pseudo_tested": bool, "plugin_autoload": bool,
    "label": str,
}


def _split(value: Any) -> list[str]:
    items = value if isinstance(value, (list, tuple)) else [value]
    out: list[str] = []
    for item in items:
        out.extend(part.strip() for part in str(item).split(",") if part.strip())
    return out


def _coerce(key: str, value: Any, base: Path) -> Any:
    if key in _SEQUENCE_KEYS:
        if not isinstance(value, (list, tuple, str)):
            raise ConfigError(key, f"expected a list of strings, got {value!r}")
        items = tuple(_split(value))
        return frozenset(items) if key in ("operators", "formats") else items
    if key in _PATH_KEYS:
        path = Path(value)
        return path if path.is_absolute() else base / path
    expected = _TYPES[key]
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, expected) or (expected is int and isinstance(value, bool)):
        raise ConfigError(key, f"expected {expected.__name__}, got {value!r}")
    return value


def read_config_file(path: Path) -> dict[str, Any]:
    """Parse an ``exmut.toml`` file into validated ``RunConfig`` overrides."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"invalid TOML: {exc}") from None
    base = path.parent
    out: dict[str, Any] = {}
    for key, value in raw.items():
        name = _ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if name not in _FIELDS:
            raise ConfigError(key, f"unknown configuration key in {path.name}")
        out[name] = _coerce(name, value, base)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="exmut", description="Extreme mutation analysis for pytest projects.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("project", type=Path, help="project root")
        p.add_argument("--config", type=Path, help=f"config file (default: <project>/{CONFIG_FILE})")
        p.add_argument("--operators", action="append", help="enabled operator ids (comma separated, repeatable)")
        p.add_argument("--exclude", action="append", dest="excludes", help="function-id glob to skip (repeatable)")
        p.add_argument("--timeout-factor", type=float)
        p.add_argument("--timeout-constant-ms", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--report-dir", type=Path)
        p.add_argument("--format", action="append", dest="formats", help=f"{', '.join(FORMATS)} (repeatable)")
        p.add_argument("--keep-workspaces", action="store_true", default=None)
        p.add_argument("--fail-on-pseudo-tested", action="store_true", default=None)
        p.add_argument("--exact-p", action="store_true", default=None,
                       help="exact permutation p-value for up to 10 projects")
        p.add_argument("--label", help="project name used in comparison tables")

    run = sub.add_parser("run", help="run one engine (or both) and write reports")
    common(run)
    run.add_argument("--engine", choices=ENGINES)
    compare = sub.add_parser("compare", help="run both engines and write a comparison table")
    common(compare)
    compare.add_argument("--append-to", type=Path, help="comparison CSV to extend with this project's row")
    return parser


def load_config(args: argparse.Namespace | Sequence[str], config_file: Optional[Path] = None) -> RunConfig:
    """Merge flags over the config file over defaults."""
    if not isinstance(args, argparse.Namespace):
        try:
            args = build_parser().parse_args(list(args))
        except _ParserError as exc:
            raise ConfigError("arguments", str(exc)) from None
    root = Path(args.project)
    values: dict[str, Any] = {}
    path = config_file or getattr(args, "config", None)
    if path is not None and not Path(path).is_file():
        raise ConfigError("config", f"no such file: {path}")
    path = Path(path) if path is not None else root / CONFIG_FILE
    if path.is_file():
        values.update(read_config_file(path))

    cwd = Path.cwd()
    for name in _FIELDS:
        flag = getattr(args, name, None)
        if flag is None:
            continue
        values[name] = _coerce(name, flag, cwd) if name in _SEQUENCE_KEYS | _PATH_KEYS else flag
    if getattr(args, "command", None) == "compare":
        values["engine"] = "both"
    return RunConfig(project_root=root, **values)


# --------------------------------------------------------------------------
# commands

def _write_engine_reports(report: EngineReport, cfg: RunConfig) -> list[Path]:
    out = cfg.reports
    stem = report.engine.value
    written = []
    if "json" in cfg.formats:
        written.append(emit_json(report, out / f"{stem}.json"))
    if "xml" in cfg.formats:
        written.append(emit_xml(report, out / f"{stem}.xml"))
    if "method-list" in cfg.formats:
        written.append(emit_method_list(report, out / f"{stem}.methods.txt"))
    if "html" in cfg.formats:
        written.append(emit_html_summary(report, out / f"{stem}.html"))
    return written


def _summary_line(report: EngineReport) -> str:
    pseudo = len(report.functions_with(Classification.PSEUDO_TESTED))
    partial = len(report.functions_with(Classification.PARTIALLY_TESTED))
    score = report.score_percent
    return (f"{report.engine.value}: created={report.mutants_created} covered={report.mutants_covered} "
            f"detected={report.mutants_killed} score={format_score(score) if score is not None else 'n/a'} "
            f"pseudo-tested={pseudo} partially-tested={partial}")


def _exit_code(reports: Sequence[EngineReport], cfg: RunConfig) -> int:
    if cfg.fail_on_pseudo_tested and any(r.functions_with(Classification.PSEUDO_TESTED) for r in reports
                                        if r.engine is Engine.EXTREME):
        return EXIT_PSEUDO_TESTED
    return EXIT_OK


def _check_root(cfg: RunConfig) -> None:
    if not cfg.project_root.is_dir():
        raise ConfigError("project", f"not a directory: {cfg.project_root}")


def cmd_run(cfg: RunConfig, out: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    _check_root(cfg)
    if cfg.engine == "both":
        return cmd_compare(cfg, out)
    report = run_engine(cfg.project_root, cfg.engine, cfg.engine_config())
    _write_engine_reports(report, cfg)
    print(_summary_line(report), file=out)
    return _exit_code([report], cfg)


def compare_project(cfg: RunConfig) -> tuple[EngineReport, EngineReport, ComparisonReport]:
    ecfg = cfg.engine_config()
    extreme = run_engine(cfg.project_root, Engine.EXTREME, ecfg)
    traditional = run_engine(cfg.project_root, Engine.TRADITIONAL_LITE, ecfg)
    return extreme, traditional, intersect_reports(extreme, traditional)


def cmd_compare(cfg: RunConfig, out: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    _check_root(cfg)
    extreme, traditional, cmp = compare_project(cfg)
    row = ProjectRow.from_reports(cfg.project_label, cmp, extreme, traditional)

    rows: list[ProjectRow] = []
    table = cfg.append_to if cfg.append_to is not None else cfg.reports / "comparison.csv"
    if cfg.append_to is not None and cfg.append_to.exists():
        rows, _ = read_comparison_table(cfg.append_to)
        rows = [r for r in rows if r.project != row.project]
    rows.append(row)

    pairs = [(r.project, float(r.extreme_score) if r.extreme_score is not None else None,
              float(r.trad_score) if r.trad_score is not None else None) for r in rows]
    cmp = with_correlation(cmp, pairs, exact=cfg.exact_p)

    for report in (extreme, traditional):
        _write_engine_reports(report, cfg)
    if "json" in cfg.formats:
        emit_json(cmp, cfg.reports / "comparison.json")
    emit_comparison_table(rows, table, exact_p=cfg.exact_p)
    emit_html_summary(cmp, cfg.reports / "comparison.html", rows)

    print(_summary_line(extreme), file=out)
    print(_summary_line(traditional), file=out)
    print(f"intersection: {len(cmp.intersected_function_ids)} functions; "
          f"extreme {format_score(cmp.extreme.score)} vs traditional {format_score(cmp.traditional.score)}",
          file=out)
    if len(rows) >= MIN_ROWS_FOR_CORRELATION:
        rho, p = table_correlation(rows, exact=cfg.exact_p)
        if rho is None:
            print(f"spearman over {len(rows)} projects: undefined (constant or missing scores)", file=out)
        else:
            print(f"spearman rho={rho:.4f} p={p:.4g} over {len(rows)} projects", file=out)
    return _exit_code([extreme, traditional], cfg)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except _ParserError as exc:
        print(f"exmut: error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return cmd_compare(cfg) if args.command == "compare" else cmd_run(cfg)
    except ExmutError as exc:
        print(f"exmut: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
