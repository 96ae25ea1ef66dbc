"""
Finding a pseudo-tested function
================================

``xmlchars.isValidXmlChar`` is called by its tests, but no assertion
depends on its result. Running the extreme engine shows every body
replacement survives.
"""

from __future__ import annotations

from pathlib import Path

from exmut.cli import load_config
from exmut.executor import run_engine
from exmut.model import Classification, Engine
from exmut.report import render_method_list

ROOT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "corpus" / "xmlchars"

cfg = load_config(["run", str(ROOT)]).engine_config()
report = run_engine(ROOT, Engine.EXTREME, cfg)

print(f"created {report.mutants_created}, covered {report.mutants_covered}, killed {report.mutants_killed}")
print(f"score {report.score_percent}")

for outcome in report.outcomes:
    print(f"{outcome.mutant_id}  {outcome.status.value:10} {', '.join(outcome.killing_tests) or '-'}")

# the weakly-tested list is the same text the CLI writes as extreme.methods.txt
print()
print(render_method_list(report), end="")
print("\npseudo-tested:", report.functions_with(Classification.PSEUDO_TESTED))
