"""pytest plugin loaded into every test subprocess (``-p exmut._probe``).

Inert unless ``EXMUT_PROBE_MODE`` is set.  Results are streamed as JSON lines
to ``EXMUT_PROBE_OUT`` so they survive a hard exit.

coverage mode
    records, per test, which known function sites were entered (via
    ``sys.setprofile``) and how long the test took.
evaluate mode
    keeps only the planned tests, runs them in plan order and enforces a
    per-test wall-clock limit from a watchdog thread.
"""

from __future__ import annotations

import json
import os
import sys
import threading
import time

import pytest

TIMEOUT_EXIT_CODE = 86

_MISSING = object()


class _Stream:
    def __init__(self, path: str) -> None:
        self._fh = open(path, "a", encoding="utf-8")
        self._lock = threading.Lock()

    def emit(self, **event) -> None:
        with self._lock:
            self._fh.write(json.dumps(event) + "\n")
            self._fh.flush()


class Probe:
    def __init__(self, mode: str, out: _Stream) -> None:
        self.mode = mode
        self.out = out
        self.failed: set[str] = set()
        self.root = os.path.realpath(os.environ.get("EXMUT_PROBE_ROOT", os.getcwd()))
        self.table: dict[str, dict[str, str]] = {}
        self.plan: dict = {}
        self.current: set[str] | None = None
        self._code_cache: dict = {}
        self._deadline: float | None = None
        self._running: str | None = None
        if mode == "coverage":
            with open(os.environ["EXMUT_PROBE_SITES"], encoding="utf-8") as fh:
                self.table = json.load(fh)
        elif mode == "evaluate":
            with open(os.environ["EXMUT_PROBE_PLAN"], encoding="utf-8") as fh:
                self.plan = json.load(fh)
            threading.Thread(target=self._watchdog, name="exmut-watchdog", daemon=True).start()

    # -- coverage -----------------------------------------------------------

    def _site_for(self, code) -> str | None:
        path = os.path.realpath(code.co_filename)
        rel = os.path.relpath(path, self.root).replace(os.sep, "/")
        by_line = self.table.get(rel)
        if by_line is None:
            return None
        return by_line.get(str(code.co_firstlineno))

    def _profile(self, frame, event, arg):
        if event != "call":
            return
        current = self.current
        if current is None:
            return
        code = frame.f_code
        site = self._code_cache.get(code, _MISSING)
        if site is _MISSING:
            site = self._site_for(code)
            self._code_cache[code] = site
        if site is not None:
            current.add(site)

    # -- evaluate -----------------------------------------------------------

    def _watchdog(self) -> None:
        while True:
            time.sleep(0.01)
            deadline = self._deadline
            if deadline is not None and time.monotonic() > deadline:
                self.out.emit(event="timeout", nodeid=self._running)
                os._exit(TIMEOUT_EXIT_CODE)

    # -- hooks --------------------------------------------------------------

    def pytest_collection_modifyitems(self, session, config, items):
        if self.mode != "evaluate" or "order" not in self.plan:
            return
        rank = {nodeid: i for i, nodeid in enumerate(self.plan["order"])}
        keep = sorted((it for it in items if it.nodeid in rank), key=lambda it: rank[it.nodeid])
        dropped = [it for it in items if it.nodeid not in rank]
        if dropped:
            config.hook.pytest_deselected(items=dropped)
        items[:] = keep

    def pytest_collection_finish(self, session):
        self.out.emit(event="collected", nodeids=[item.nodeid for item in session.items])

    def pytest_collectreport(self, report):
        if report.failed:
            self.out.emit(event="collect_error", nodeid=report.nodeid or "<collection>")

    @pytest.hookimpl(wrapper=True)
    def pytest_runtest_protocol(self, item, nextitem):
        start = time.perf_counter()
        if self.mode == "coverage":
            self.current = set()
            sys.setprofile(self._profile)
            threading.setprofile(self._profile)
        else:
            limit = self.plan.get("limits_s", {}).get(item.nodeid)
            self._running = item.nodeid
            self._deadline = time.monotonic() + limit if limit is not None else None
        try:
            return (yield)
        finally:
            if self.mode == "coverage":
                sys.setprofile(None)
                threading.setprofile(None)
            self._deadline = None
            elapsed_ms = int(round((time.perf_counter() - start) * 1000))
            event = {
                "event": "test",
                "nodeid": item.nodeid,
                "outcome": "failed" if item.nodeid in self.failed else "passed",
                "duration_ms": elapsed_ms,
            }
            if self.mode == "coverage":
                event["sites"] = sorted(self.current or ())
                self.current = None
            self.out.emit(**event)

    def pytest_runtest_logreport(self, report):
        if report.failed:
            self.failed.add(report.nodeid)


def pytest_configure(config):
    mode = os.environ.get("EXMUT_PROBE_MODE")
    out = os.environ.get("EXMUT_PROBE_OUT")
    if not mode or not out:
        return
    config.pluginmanager.register(Probe(mode, _Stream(out)), "exmut-probe")
