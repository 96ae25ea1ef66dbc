"""Coverage collection, per-mutant test execution and the engine pipeline.

Tests run under pytest in a subprocess with :mod:`exmut._probe` loaded.  A
baseline run records which functions each test enters; each mutant then runs
only the tests that reach its function, fastest first, stopping at the first
failure.
"""

from __future__ import annotations

import json
import logging
import os
import random
import signal
import subprocess
import sys
import tempfile
import time
import uuid
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from queue import Queue
from typing import Iterable, Mapping, Optional, Sequence, Union

import exmut

from .analysis import build_engine_report
from .discovery import DiscoveryConfig, apply_structural_filters, discover
from .errors import BaselineRedTests, SyntaxBreak
from .model import Engine, EngineReport, FunctionSite, Mutant, MutantOutcome, MutantStatus
from .mutator import ParsedSource, Workspace, generate_mutants, tree_digest
from .operators import OperatorCatalog

log = logging.getLogger(__name__)

SUITE = "<suite>"

_PROBE_TIMEOUT_EXIT = 86


@dataclass(frozen=True)
class TimeoutPolicy:
    factor: float = 2.0
    constant_ms: int = 4000

    def __post_init__(self) -> None:
        if self.factor < 1:
            raise ValueError("timeout factor must be >= 1")
        if self.constant_ms < 0:
            raise ValueError("timeout constant must be >= 0")

    def limit_ms(self, baseline_ms: float) -> float:
        return baseline_ms * self.factor + self.constant_ms


@dataclass(frozen=True)
class CoverageMap:
    """Which discovered sites each test enters, plus baseline timings.

    ``precision`` is ``"suite-level"`` when per-test tracing was unavailable;
    the map then holds a single pseudo-test, :data:`SUITE`, covering every
    site.
    """

    entries: Mapping[str, frozenset[str]]
    baseline_test_time_ms: Mapping[str, int]
    precision: str = "per-test"

    def covered_sites(self) -> frozenset[str]:
        return frozenset().union(*self.entries.values()) if self.entries else frozenset()


@dataclass(frozen=True)
class PytestRunner:
    """How to invoke the project's test suite."""

    python: str = sys.executable
    roots: tuple[str, ...] = (".",)
    pytest_args: tuple[str, ...] = ()
    plugin_autoload: bool = True
    startup_allowance_s: float = 30.0
    baseline_timeout_s: float = 1800.0

    def command(self, workspace: Path, extra: Sequence[str] = (), probe: bool = True) -> list[str]:
        cmd = [self.python, "-m", "pytest", "-q", "-p", "no:cacheprovider", "--rootdir", str(workspace)]
        if probe:
            cmd[3:3] = ["-p", "exmut._probe"]
        return cmd + list(self.pytest_args) + list(extra)

    def env(self, workspace: Path, extra: Mapping[str, str] = ()) -> dict[str, str]:
        env = {k: v for k, v in os.environ.items() if not k.startswith(("EXMUT_PROBE_", "PYTEST_ADDOPTS"))}
        package_parent = str(Path(exmut.__file__).resolve().parent.parent)
        paths = [str((workspace / r).resolve()) for r in self.roots] + [package_parent]
        if env.get("PYTHONPATH"):
            paths.append(env["PYTHONPATH"])
        env["PYTHONPATH"] = os.pathsep.join(paths)
        env["PYTHONDONTWRITEBYTECODE"] = "1"
        if not self.plugin_autoload:
            env["PYTEST_DISABLE_PLUGIN_AUTOLOAD"] = "1"
        env.update(extra)
        return env


@dataclass
class _Run:
    returncode: Optional[int]
    events: list[dict]
    output: str
    timed_out: bool


def _run_pytest(runner: PytestRunner, workspace: Path, *, extra_args: Sequence[str] = (),
                probe_env: Optional[Mapping[str, str]] = None, timeout_s: float) -> _Run:
    probe_dir = Path(tempfile.mkdtemp(prefix="exmut-probe-"))
    out_file = probe_dir / "events.jsonl"
    env_extra = {}
    if probe_env is not None:
        env_extra = {"EXMUT_PROBE_OUT": str(out_file), "EXMUT_PROBE_ROOT": str(workspace), **probe_env}
    cmd = runner.command(workspace, extra_args, probe=probe_env is not None)
    proc = subprocess.Popen(cmd, cwd=workspace, env=runner.env(workspace, env_extra),
                            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, start_new_session=True)
    timed_out = False
    try:
        output, _ = proc.communicate(timeout=timeout_s)
    except subprocess.TimeoutExpired:
        timed_out = True
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        output, _ = proc.communicate()
    events = []
    if out_file.exists():
        for line in out_file.read_text(encoding="utf-8").splitlines():
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError:
                # a hard exit can truncate the final line
                continue
    for p in probe_dir.iterdir():
        p.unlink()
    probe_dir.rmdir()
    return _Run(proc.returncode, events, output.decode("utf-8", "replace"), timed_out)


def _write_json(obj, directory: Path, stem: str) -> Path:
    path = directory / f"{stem}-{uuid.uuid4().hex}.json"
    path.write_text(json.dumps(obj), encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# coverage

def collect_coverage(project_root: Union[str, Path], sites: Iterable[FunctionSite], *,
                     runner: PytestRunner = PytestRunner(), tracing: bool = True) -> CoverageMap:
    """Run the unmutated suite once and map each test to the sites it enters.

    Raises :class:`BaselineRedTests` if any test fails.  Falls back to a
    suite-level map when the probe cannot be loaded or ``tracing`` is off.
    """
    root = Path(project_root).resolve()
    sites = list(sites)
    if tracing:
        table: dict[str, dict[str, str]] = {}
        for site in sites:
            table.setdefault(site.file, {})[str(site.first_line)] = site.id
        with tempfile.TemporaryDirectory(prefix="exmut-cov-") as tmp:
            sites_file = _write_json(table, Path(tmp), "sites")
            run = _run_pytest(runner, root, probe_env={"EXMUT_PROBE_MODE": "coverage",
                                                       "EXMUT_PROBE_SITES": str(sites_file)},
                              timeout_s=runner.baseline_timeout_s)
        if any(e["event"] == "collected" for e in run.events):
            return _coverage_from_events(run)
        log.warning("per-test tracing unavailable, falling back to suite-level coverage")
    return _suite_level_coverage(runner, root, sites)


def _check_baseline(run: _Run, failing: list[str]) -> None:
    if run.timed_out:
        raise BaselineRedTests([], "baseline run exceeded its time limit")
    if run.returncode == 5:  # no tests collected
        return
    if failing or run.returncode != 0:
        raise BaselineRedTests(failing, run.output[-4000:])


def _coverage_from_events(run: _Run) -> CoverageMap:
    tests = [e for e in run.events if e["event"] == "test"]
    failing = [e["nodeid"] for e in tests if e["outcome"] == "failed"]
    failing += [e["nodeid"] for e in run.events if e["event"] == "collect_error"]
    _check_baseline(run, failing)
    entries = {e["nodeid"]: frozenset(e["sites"]) for e in tests}
    times = {e["nodeid"]: int(e["duration_ms"]) for e in tests}
    return CoverageMap(entries, times, "per-test")


def _suite_level_coverage(runner: PytestRunner, root: Path, sites: list[FunctionSite]) -> CoverageMap:
    start = time.perf_counter()
    run = _run_pytest(runner, root, timeout_s=runner.baseline_timeout_s)
    elapsed = int((time.perf_counter() - start) * 1000)
    _check_baseline(run, [])
    if run.returncode == 5:
        return CoverageMap({}, {}, "suite-level")
    return CoverageMap({SUITE: frozenset(s.id for s in sites)}, {SUITE: elapsed}, "suite-level")


def _speed_bucket(ms: int) -> int:
    # 0 below one second, then one bucket per decade; coarse so that timing
    # jitter between runs does not reorder tests
    return max(0, len(str(max(int(ms), 0))) - 3)


def select_tests(coverage: CoverageMap, site: Union[FunctionSite, str]) -> list[str]:
    """Tests entering ``site``, fastest first.

    Tests are grouped by baseline time (under 1 s, 1-10 s, 10-100 s, ...)
    and ordered by node id inside a group.
    """
    site_id = site if isinstance(site, str) else site.id
    chosen = [t for t, covered in coverage.entries.items() if site_id in covered]
    times = coverage.baseline_test_time_ms
    return sorted(chosen, key=lambda t: (_speed_bucket(times.get(t, 0)), t))


# --------------------------------------------------------------------------
# evaluation

def _interpret(run: _Run, mutant_id: str, elapsed_ms: int) -> MutantOutcome:
    events = run.events
    if run.timed_out or run.returncode == _PROBE_TIMEOUT_EXIT or any(e["event"] == "timeout" for e in events):
        return MutantOutcome(mutant_id, MutantStatus.TIMED_OUT, (), elapsed_ms)
    failed = [e["nodeid"] for e in events if e["event"] == "test" and e["outcome"] == "failed"]
    failed += [e["nodeid"] for e in events if e["event"] == "collect_error"]
    if failed:
        return MutantOutcome(mutant_id, MutantStatus.KILLED, tuple(dict.fromkeys(failed)), elapsed_ms)
    if run.returncode == 0:
        return MutantOutcome(mutant_id, MutantStatus.SURVIVED, (), elapsed_ms)
    return MutantOutcome(mutant_id, MutantStatus.CRASHED, (), elapsed_ms)


def _interpret_suite(run: _Run, mutant_id: str, elapsed_ms: int) -> MutantOutcome:
    if run.timed_out:
        return MutantOutcome(mutant_id, MutantStatus.TIMED_OUT, (), elapsed_ms)
    if run.returncode == 0:
        return MutantOutcome(mutant_id, MutantStatus.SURVIVED, (), elapsed_ms)
    if run.returncode in (1, 2):
        return MutantOutcome(mutant_id, MutantStatus.KILLED, (SUITE,), elapsed_ms)
    return MutantOutcome(mutant_id, MutantStatus.CRASHED, (), elapsed_ms)


def run_tests(workspace: Path, tests: Sequence[str], policy: TimeoutPolicy, *,
              runner: PytestRunner = PytestRunner(), baseline_ms: Mapping[str, int] = {},
              fail_fast: bool = True, mutant_id: str = "") -> MutantOutcome:
    """Run ``tests`` against whatever is currently in ``workspace``."""
    start = time.perf_counter()
    if list(tests) == [SUITE]:
        limit_s = policy.limit_ms(baseline_ms.get(SUITE, 0)) / 1000
        run = _run_pytest(runner, workspace, extra_args=["-x"] if fail_fast else [],
                          timeout_s=limit_s + runner.startup_allowance_s)
        return _interpret_suite(run, mutant_id, int((time.perf_counter() - start) * 1000))

    limits = {t: policy.limit_ms(baseline_ms.get(t, 0)) / 1000 for t in tests}
    files = list(dict.fromkeys(t.split("::", 1)[0] for t in tests))
    with tempfile.TemporaryDirectory(prefix="exmut-plan-") as tmp:
        plan = _write_json({"order": list(tests), "limits_s": limits}, Path(tmp), "plan")
        run = _run_pytest(runner, workspace, extra_args=(["-x"] if fail_fast else []) + files,
                          probe_env={"EXMUT_PROBE_MODE": "evaluate", "EXMUT_PROBE_PLAN": str(plan)},
                          timeout_s=sum(limits.values()) + runner.startup_allowance_s)
    return _interpret(run, mutant_id, int((time.perf_counter() - start) * 1000))


def evaluate_mutant(workspace: Union[Workspace, Path], mutant: Mutant, tests: Sequence[str],
                    policy: TimeoutPolicy = TimeoutPolicy(), *, runner: PytestRunner = PytestRunner(),
                    baseline_ms: Mapping[str, int] = {}, original: Optional[bytes] = None,
                    fail_fast: bool = True) -> MutantOutcome:
    """Apply ``mutant`` in ``workspace``, run ``tests`` and restore the file."""
    if not tests:
        return MutantOutcome(mutant.mutant_id, MutantStatus.NOT_COVERED, (), 0)
    ws = workspace if isinstance(workspace, Workspace) else Workspace(Path(workspace), keep=True)
    if original is None:
        original = (ws.path / mutant.site.file).read_bytes()
    start = time.perf_counter()
    try:
        with ws.applied(mutant, original):
            return run_tests(ws.path, tests, policy, runner=runner, baseline_ms=baseline_ms,
                             fail_fast=fail_fast, mutant_id=mutant.mutant_id)
    except SyntaxBreak as exc:
        log.warning("%s", exc)
        return MutantOutcome(mutant.mutant_id, MutantStatus.BUILD_ERROR, (),
                             int((time.perf_counter() - start) * 1000))


# --------------------------------------------------------------------------
# engine pipeline

@dataclass(frozen=True)
class EngineConfig:
    discovery: DiscoveryConfig = field(default_factory=DiscoveryConfig)
    operators: Optional[frozenset[str]] = None
    timeout: TimeoutPolicy = TimeoutPolicy()
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)
    runner: PytestRunner = PytestRunner()
    scratch: Optional[Path] = None
    keep_workspaces: bool = False
    fail_fast: bool = True
    tracing: bool = True
    shuffle_seed: Optional[int] = None
    ignore_paths: tuple[Path, ...] = ()

    def __post_init__(self) -> None:
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def catalog(self, engine: Engine) -> OperatorCatalog:
        if engine is Engine.EXTREME:
            return OperatorCatalog.extreme(self.operators)
        return OperatorCatalog.traditional(self.operators)


def create_mutants(sites: Iterable[FunctionSite], catalog: OperatorCatalog, project_root: Path,
                   parsed: Optional[dict[str, ParsedSource]] = None) -> list[Mutant]:
    parsed = {} if parsed is None else parsed
    mutants: list[Mutant] = []
    for site in sites:
        if site.file not in parsed:
            parsed[site.file] = ParsedSource.from_file(project_root / site.file)
        mutants.extend(generate_mutants(site, catalog, parsed[site.file]))
    return mutants


def run_engine(project_root: Union[str, Path], engine: Union[Engine, str],
               config: EngineConfig = EngineConfig()) -> EngineReport:
    """Discover, filter, mutate, evaluate and aggregate for one engine."""
    started = time.perf_counter()
    engine = Engine(engine)
    root = Path(project_root).resolve()
    digest = tree_digest(root)
    dcfg = replace(config.discovery, project_root=root)
    found = discover(dcfg)
    included, excluded = apply_structural_filters(found.sites, dcfg)
    parsed: dict[str, ParsedSource] = {}
    mutants = create_mutants(included, config.catalog(engine), root, parsed)

    workspaces: Queue[Workspace] = Queue()
    created: list[Workspace] = []

    def new_workspace() -> Workspace:
        ws = Workspace.create(root, scratch=config.scratch, ignore_paths=config.ignore_paths,
                              keep=config.keep_workspaces)
        created.append(ws)
        return ws

    try:
        baseline_ws = new_workspace()
        base_start = time.perf_counter()
        coverage = collect_coverage(baseline_ws.path, included, runner=config.runner, tracing=config.tracing)
        baseline_ms = int((time.perf_counter() - base_start) * 1000)
        workspaces.put(baseline_ws)

        plans = [(m, select_tests(coverage, m.site)) for m in mutants]
        pending = [(m, tests) for m, tests in plans if tests]
        if config.shuffle_seed is not None:
            random.Random(config.shuffle_seed).shuffle(pending)
        for _ in range(min(config.jobs, len(pending)) - 1):
            workspaces.put(new_workspace())

        outcomes: dict[str, MutantOutcome] = {
            m.mutant_id: MutantOutcome(m.mutant_id, MutantStatus.NOT_COVERED) for m, tests in plans if not tests
        }

        def task(mutant: Mutant, tests: list[str]) -> MutantOutcome:
            ws = workspaces.get()
            try:
                return evaluate_mutant(ws, mutant, tests, config.timeout, runner=config.runner,
                                       baseline_ms=coverage.baseline_test_time_ms,
                                       original=parsed[mutant.site.file].data, fail_fast=config.fail_fast)
            finally:
                workspaces.put(ws)

        with ThreadPoolExecutor(max_workers=config.jobs, thread_name_prefix="exmut") as pool:
            futures = [pool.submit(task, m, tests) for m, tests in pending]
            for fut in as_completed(futures):
                outcome = fut.result()
                outcomes[outcome.mutant_id] = outcome
    finally:
        for ws in created:
            ws.cleanup()

    return build_engine_report(
        engine,
        digest,
        found.sites,
        excluded,
        mutants,
        [outcomes[m.mutant_id] for m in mutants],
        total_wall_time_ms=int((time.perf_counter() - started) * 1000),
        baseline_wall_time_ms=baseline_ms,
        coverage_precision=coverage.precision,
        parse_failures=[str(f) for f in found.parse_failures],
    )
